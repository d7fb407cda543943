"""Conforming Lagrangian FE spaces, FE functions and multi-field spaces.

Global DOF ids are signed: free DOF ``i`` is stored as ``i`` and Dirichlet DOF
``d`` as ``-(d + 1)``. Nodes are identified across cells by an integer key made
of the owning entity's sorted global vertex ids and the node's lattice weights
with respect to those vertices, so shared vertices, edges and faces produce
the same global node in every adjacent cell whatever the local orientation.
"""
from __future__ import annotations

import copy
import logging
from typing import Any, Sequence

import numpy as np

from .arrays import CellArray, FillArray, JaggedTable, lazy_map
from .celldata import CellField, DomainStyle, cell_basis
from .errors import LengthMismatchError, UnsupportedElementError
from .fields import LinearCombinationField, as_field
from .geometry import DiscreteModel, Triangulation
from .maps import Broadcasting, Reindex
from .reffe import ReferenceFE, entity_subsets, make_reference_fe

logger = logging.getLogger(__name__)


def _normalize_tags(dirichlet_tags: Any, num_components: int) -> list[tuple[str, np.ndarray]]:
    if isinstance(dirichlet_tags, str):
        dirichlet_tags = [dirichlet_tags]
    out = []
    for entry in dirichlet_tags or ():
        if isinstance(entry, str):
            tag, mask = entry, np.ones(num_components, dtype=bool)
        else:
            tag, mask = entry
            mask = np.asarray(mask, dtype=bool).reshape(-1)
            if len(mask) != num_components:
                raise ValueError(f"mask of tag {tag!r} has {len(mask)} entries for {num_components} components")
        out.append((tag, mask))
    return out


class FESpace:
    """Single-field conforming space on a model with a single cell topology."""

    def __init__(self, model: DiscreteModel, reffe: ReferenceFE, dirichlet_tags: Any = ()):
        if reffe.topology is not model.topology:
            raise UnsupportedElementError(f"{reffe!r} does not match {model.topology.value} cells")
        self.model = model
        self.reffe = reffe
        self.tri: Triangulation = model.bulk
        self.num_components = reffe.num_components
        self.dirichlet_tags = _normalize_tags(dirichlet_tags, self.num_components)
        for tag, _ in self.dirichlet_tags:
            model.tagged_facets(tag)
        self._number_nodes()
        self._number_dofs()
        self.dirichlet_values = np.zeros(self.num_dirichlet_dofs)
        logger.debug(
            "space %r: %d free and %d Dirichlet DOFs", reffe, self.num_free_dofs, self.num_dirichlet_dofs
        )

    def _number_nodes(self) -> None:
        reffe, model = self.reffe, self.model
        topology = reffe.topology
        cells = model.cells.to_dense()
        geo = make_reference_fe(topology, 1)
        weights = geo.shapes._evaluate(None, reffe.node_coordinates)
        scale = reffe.order ** topology.dim
        width = topology.num_vertices
        keys = np.full((len(cells), reffe.num_nodes, 1 + 2 * width), -1, dtype=np.int64)
        for n, (dim, lid) in enumerate(reffe.node_owners):
            local = list(topology.entities(dim)[lid])
            vertices = cells[:, local]
            order = np.argsort(vertices, axis=1)
            node_weights = np.rint(weights[n, local] * scale).astype(np.int64)
            keys[:, n, 0] = dim
            keys[:, n, 1:1 + len(local)] = np.take_along_axis(vertices, order, axis=1)
            keys[:, n, 1 + width:1 + width + len(local)] = node_weights[order]
        flat = keys.reshape(-1, keys.shape[-1])
        unique, inverse = np.unique(flat, axis=0, return_inverse=True)
        self.cell_nodes = inverse.reshape(len(cells), reffe.num_nodes)
        self.num_nodes = len(unique)
        self.node_keys = unique
        coords = model.node_coordinates[cells]
        self.node_coordinates = np.zeros((self.num_nodes, model.num_point_dims))
        self.node_coordinates[self.cell_nodes] = np.einsum("nv,cvd->cnd", weights, coords)

    def _node_entity(self, node: int) -> tuple:
        key = self.node_keys[node]
        width = self.reffe.topology.num_vertices
        vertices = key[1:1 + width]
        return tuple(int(v) for v in vertices[vertices >= 0])

    def _number_dofs(self) -> None:
        nc = self.num_components
        ndofs = self.num_nodes * nc
        dof_tag = np.full(ndofs, -1, dtype=np.int64)
        facet_nodes = self.model.facet_nodes
        for t, (tag, mask) in enumerate(self.dirichlet_tags):
            closure: set[tuple] = set()
            for f in self.model.tagged_facets(tag):
                closure.update(entity_subsets(tuple(int(v) for v in facet_nodes[f])))
            on_tag = np.array([self._node_entity(n) in closure for n in range(self.num_nodes)], dtype=bool)
            for c in np.flatnonzero(mask):
                dofs = np.flatnonzero(on_tag) * nc + c
                dofs = dofs[dof_tag[dofs] < 0]
                dof_tag[dofs] = t
        is_dirichlet = dof_tag >= 0
        free_ids = np.cumsum(~is_dirichlet) - 1
        dir_ids = np.cumsum(is_dirichlet) - 1
        self.dof_signed_ids = np.where(is_dirichlet, -(dir_ids + 1), free_ids)
        self.num_free_dofs = int((~is_dirichlet).sum())
        self.num_dirichlet_dofs = int(is_dirichlet.sum())
        self.dirichlet_dof_tag = dof_tag[is_dirichlet]
        self.dirichlet_dof_global = np.flatnonzero(is_dirichlet)
        self.free_dof_global = np.flatnonzero(~is_dirichlet)
        local = (self.cell_nodes[:, :, None] * nc + np.arange(nc)).reshape(len(self.cell_nodes), -1)
        self.cell_dof_ids = self.dof_signed_ids[local]
        self.cell_dofs = JaggedTable.from_dense(self.cell_dof_ids)

    @property
    def num_dofs(self) -> int:
        return self.num_free_dofs

    @property
    def value_shape(self) -> tuple:
        return self.reffe.value_shape

    def cell_dof_array(self, tri: Triangulation | None = None) -> np.ndarray:
        """Dense signed DOF ids per cell of ``tri`` (facets use their adjacent cell)."""
        if tri is None or tri is self.tri:
            return self.cell_dof_ids
        if tri.is_boundary and tri.parent is self.tri:
            return self.cell_dof_ids[tri.cell_ids]
        raise ValueError(f"{tri!r} is not a triangulation of this space's model")

    def dof_values(self, g: Any) -> np.ndarray:
        """``g`` sampled at the node of every global DOF, component by component."""
        values = np.asarray(as_field(g)._evaluate(None, self.node_coordinates), dtype=float)
        values = np.broadcast_to(values, (self.num_nodes,) + self.value_shape)
        return values.reshape(-1)

    def __repr__(self) -> str:
        return f"FESpace({self.reffe!r}, free={self.num_free_dofs}, dirichlet={self.num_dirichlet_dofs})"


def make_fespace(model: DiscreteModel, reffe: ReferenceFE | int, dirichlet_tags: Any = (), value_shape: Any = ()) -> FESpace:
    if not isinstance(reffe, ReferenceFE):
        reffe = make_reference_fe(model.topology, int(reffe), value_shape)
    return FESpace(model, reffe, dirichlet_tags)


def trial_space(test: FESpace, g: Any = None) -> FESpace:
    """Space with the numbering of ``test`` and Dirichlet values taken from ``g``.

    ``g`` is one function for every Dirichlet tag or a list with one per tag.
    """
    space = copy.copy(test)
    values = np.zeros(test.num_dirichlet_dofs)
    if g is not None and test.num_dirichlet_dofs:
        functions = list(g) if isinstance(g, (list, tuple)) else [g] * len(test.dirichlet_tags)
        if len(functions) != len(test.dirichlet_tags):
            raise LengthMismatchError(f"{len(functions)} functions for {len(test.dirichlet_tags)} Dirichlet tags")
        for t, func in enumerate(functions):
            selected = test.dirichlet_dof_tag == t
            if selected.any():
                values[selected] = test.dof_values(func)[test.dirichlet_dof_global[selected]]
    space.dirichlet_values = values
    return space


def fe_basis(space: FESpace, kind: str = "test") -> CellField:
    return cell_basis(space.tri, space.reffe, kind)


class FEFunction(CellField):
    """Piecewise polynomial ``sum_j u_j s_j`` with values gathered per cell."""

    def __init__(self, space: FESpace, free_values: Any, dirichlet_values: Any = None):
        free_values = np.asarray(free_values, dtype=float)
        if free_values.shape != (space.num_free_dofs,):
            raise LengthMismatchError(f"{free_values.shape[0] if free_values.ndim else 0} values for {space.num_free_dofs} free DOFs")
        if dirichlet_values is None:
            dirichlet_values = space.dirichlet_values
        self.space = space
        self.free_values = free_values
        self.dirichlet_values = np.asarray(dirichlet_values, dtype=float)
        self.all_values = np.concatenate([free_values, self.dirichlet_values])
        ids = space.cell_dofs
        positions = JaggedTable(np.where(ids.data >= 0, ids.data, space.num_free_dofs - ids.data - 1), ids.ptrs)
        self.cell_values: CellArray = lazy_map(Broadcasting(Reindex(self.all_values)), positions)
        shapes = FillArray(space.reffe.shapes, len(positions))
        super().__init__(lazy_map(LinearCombinationField, self.cell_values, shapes), space.tri, DomainStyle.REFERENCE)

    def __repr__(self) -> str:
        return f"FEFunction({self.space!r})"


def fe_function(space: FESpace, free_values: Any) -> FEFunction:
    return FEFunction(space, free_values)


def interpolate(g: Any, space: FESpace) -> FEFunction:
    """Nodal interpolation of ``g`` into free and Dirichlet DOFs alike."""
    values = space.dof_values(g)
    return FEFunction(space, values[space.free_dof_global], values[space.dirichlet_dof_global])


class MultiFieldFESpace:
    """Cartesian product of single-field spaces with field-major global numbering."""

    def __init__(self, spaces: Sequence[FESpace]):
        spaces = list(spaces)
        if not spaces:
            raise ValueError("a multi-field space needs at least one field")
        if any(s.model is not spaces[0].model for s in spaces):
            raise ValueError("all fields of a multi-field space must share the model")
        self.spaces = spaces
        self.model = spaces[0].model
        self.tri = spaces[0].tri
        sizes = [s.num_free_dofs for s in spaces]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.num_free_dofs = int(self.offsets[-1])

    @property
    def num_fields(self) -> int:
        return len(self.spaces)

    def __len__(self) -> int:
        return len(self.spaces)

    def __getitem__(self, i: int) -> FESpace:
        return self.spaces[i]

    def __repr__(self) -> str:
        return f"MultiFieldFESpace({self.spaces!r})"


def multi_field(spaces: Sequence[FESpace]) -> MultiFieldFESpace:
    return MultiFieldFESpace(spaces)


def mf_basis(mf: MultiFieldFESpace, kind: str = "test") -> list[CellField]:
    n = mf.num_fields
    return [cell_basis(s.tri, s.reffe, kind, block=i, num_blocks=n) for i, s in enumerate(mf.spaces)]


def mf_function(mf: MultiFieldFESpace, free_values: Any) -> list[FEFunction]:
    free_values = np.asarray(free_values, dtype=float)
    if free_values.shape != (mf.num_free_dofs,):
        raise LengthMismatchError(f"{len(free_values)} values for {mf.num_free_dofs} free DOFs")
    return [FEFunction(s, free_values[mf.offsets[i]:mf.offsets[i + 1]]) for i, s in enumerate(mf.spaces)]


def multi_field_trial(test: MultiFieldFESpace, functions: Sequence[Any]) -> MultiFieldFESpace:
    """Trial spaces field by field; ``None`` keeps homogeneous Dirichlet values."""
    return MultiFieldFESpace([trial_space(s, g) for s, g in zip(test.spaces, functions)])
