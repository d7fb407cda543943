"""Discrete models, triangulations and the lazy cell-wise geometry built on them."""
from __future__ import annotations

import functools
import itertools
import logging
from typing import Any, Iterable, Sequence

import numpy as np

from . import tensors
from .arrays import CellArray, CompressedArray, FillArray, JaggedTable, lazy_map
from .errors import MeshValidationError, UnknownTagError, UnsupportedElementError
from .fields import ConstantField, EvalCache, Field, LinearCombinationField, compose, gradient
from .maps import Broadcasting, Reindex
from .reffe import CellTopology, make_reference_fe

logger = logging.getLogger(__name__)

SIDE_TAGS = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")


class FacetEmbedding(Field):
    """Affine map from facet reference coordinates into the reference cell."""

    name = "facet_embedding"

    def __init__(self, origin: Any, matrix: Any):
        self.origin = np.asarray(origin, dtype=float)
        self.matrix = np.asarray(matrix, dtype=float)

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        return self.origin + xs @ self.matrix.T

    def gradient(self) -> Field:
        return ConstantField(self.matrix.T)


class DiscreteModel:
    """Nodes, cell connectivity, cell topologies and facet labels."""

    def __init__(
        self,
        node_coordinates: Any,
        cells: JaggedTable,
        cell_types: CompressedArray,
        labels: dict[str, Any] | None = None,
    ):
        self.node_coordinates = np.asarray(node_coordinates, dtype=float)
        if self.node_coordinates.ndim != 2:
            raise MeshValidationError("node coordinates must be a (nnodes, D) array")
        self.cells = cells
        self.cell_types = cell_types
        if len(cells) != len(cell_types):
            raise MeshValidationError(f"{len(cells)} cells but {len(cell_types)} cell types")
        if cells.data.size and (cells.data.min() < 0 or cells.data.max() >= self.num_nodes):
            raise MeshValidationError("cell connectivity references a node that does not exist")
        for t, topology in enumerate(cell_types.values):
            rows = cells.row_lengths[cell_types.index_map == t]
            if np.any(rows != topology.num_vertices):
                raise MeshValidationError(f"{topology.value} cells must list {topology.num_vertices} nodes")
        dims = {t.dim for t in self.used_topologies()}
        if len(dims) > 1:
            raise MeshValidationError("all cells of a model must have the same dimension")
        self.dim = dims.pop() if dims else self.node_coordinates.shape[1]
        self.labels: dict[str, np.ndarray] = {}
        for tag, ids in (labels or {}).items():
            self.add_tag(tag, ids)

    @property
    def num_nodes(self) -> int:
        return len(self.node_coordinates)

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def num_point_dims(self) -> int:
        return self.node_coordinates.shape[1]

    def used_topologies(self) -> list[CellTopology]:
        used = np.unique(self.cell_types.index_map)
        return [self.cell_types.values[t] for t in used]

    @property
    def topology(self) -> CellTopology:
        used = {t for t in self.used_topologies()}
        if len(used) != 1:
            raise UnsupportedElementError("this operation needs a model with a single cell topology")
        return used.pop()

    @functools.cached_property
    def _facets(self) -> dict[str, Any]:
        cells, locals_, verts = [], [], []
        for t, topology in enumerate(self.cell_types.values):
            ids = np.flatnonzero(self.cell_types.index_map == t)
            if not len(ids):
                continue
            rows = self.cells.data[self.cells.ptrs[ids][:, None] + np.arange(topology.num_vertices)]
            for lf, local in enumerate(topology.facets):
                cells.append(ids)
                locals_.append(np.full(len(ids), lf, dtype=np.int64))
                verts.append(rows[:, list(local)])
        width = max((v.shape[1] for v in verts), default=1)
        verts = [np.pad(v, ((0, 0), (0, width - v.shape[1])), constant_values=-1) for v in verts]
        cell = np.concatenate(cells) if cells else np.zeros(0, dtype=np.int64)
        local = np.concatenate(locals_) if locals_ else np.zeros(0, dtype=np.int64)
        vert = np.concatenate(verts) if verts else np.zeros((0, width), dtype=np.int64)
        order = np.lexsort((local, cell))
        cell, local, vert = cell[order], local[order], vert[order]
        keys = np.sort(vert, axis=1)
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        perm = np.argsort(first, kind="stable")
        renumber = np.empty(len(perm), dtype=np.int64)
        renumber[perm] = np.arange(len(perm))
        facet_of = renumber[inverse]
        first = first[perm]
        facet_rows = [row[row >= 0] for row in vert[first]]
        by_facet = np.argsort(facet_of, kind="stable")
        counts = np.bincount(facet_of, minlength=len(first))
        ptrs = np.concatenate([[0], np.cumsum(counts)])
        cell_ptrs = np.concatenate([[0], np.cumsum(np.bincount(cell, minlength=self.num_cells))])
        logger.debug("extracted %d facets from %d cells", len(first), self.num_cells)
        return {
            "nodes": JaggedTable.from_rows(facet_rows, dtype=np.int64),
            "keys": keys[first],
            "cells": JaggedTable(cell[by_facet], ptrs),
            "locals": JaggedTable(local[by_facet], ptrs),
            "cell_facets": JaggedTable(facet_of, cell_ptrs),
            "first_cell": cell[first],
            "first_local": local[first],
        }

    @property
    def num_facets(self) -> int:
        return len(self._facets["first_cell"])

    @property
    def facet_nodes(self) -> JaggedTable:
        return self._facets["nodes"]

    @property
    def facet_cells(self) -> JaggedTable:
        return self._facets["cells"]

    @property
    def cell_facets(self) -> JaggedTable:
        return self._facets["cell_facets"]

    def facet_parent(self, facet_ids: Any) -> tuple[np.ndarray, np.ndarray]:
        """First adjacent cell and the facet's local index in it."""
        facet_ids = np.asarray(facet_ids, dtype=np.int64)
        return self._facets["first_cell"][facet_ids], self._facets["first_local"][facet_ids]

    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells.row_lengths == 1)

    def facets_from_vertices(self, rows: Iterable[Sequence[int]]) -> np.ndarray:
        """Facet ids of facets given by their vertex ids in any order."""
        keys = self._facets["keys"]
        lookup = {tuple(int(v) for v in k if v >= 0): f for f, k in enumerate(keys)}
        ids = []
        for row in rows:
            key = tuple(sorted(int(v) for v in row))
            if key not in lookup:
                raise MeshValidationError(f"no facet with vertices {list(row)}")
            ids.append(lookup[key])
        return np.asarray(ids, dtype=np.int64)

    def add_tag(self, tag: str, facet_ids: Any) -> None:
        ids = np.unique(np.asarray(facet_ids, dtype=np.int64).reshape(-1))
        if ids.size and (ids[0] < 0 or ids[-1] >= self.num_facets):
            raise MeshValidationError(f"tag {tag!r} references a facet that does not exist")
        self.labels[tag] = ids

    def add_tag_from_tags(self, tag: str, tags: Sequence[str] | str) -> None:
        self.add_tag(tag, self.tagged_facets(tags))

    def tagged_facets(self, tags: Sequence[str] | str) -> np.ndarray:
        if isinstance(tags, str):
            tags = [tags]
        missing = [t for t in tags if t not in self.labels]
        if missing:
            raise UnknownTagError(f"unknown tag {missing[0]!r} (known: {', '.join(sorted(self.labels))})")
        if not tags:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([self.labels[t] for t in tags]))

    @functools.cached_property
    def bulk(self) -> "Triangulation":
        return Triangulation(self)

    def __repr__(self) -> str:
        kinds = ",".join(t.value for t in self.used_topologies())
        return f"DiscreteModel(dim={self.dim}, nodes={self.num_nodes}, cells={self.num_cells}, topology={kinds})"


class Triangulation:
    """Bulk triangulation: every cell of a model with its lazy geometry."""

    is_boundary = False
    parent: "Triangulation | None" = None

    def __init__(self, model: DiscreteModel):
        self.model = model
        self.topology = model.topology
        self.dim = self.topology.dim

    @property
    def num_cells(self) -> int:
        return self.model.num_cells

    def __len__(self) -> int:
        return self.num_cells

    @property
    def cell_nodes(self) -> JaggedTable:
        return self.model.cells

    @functools.cached_property
    def geometry_reffe(self):
        return make_reference_fe(self.topology, 1)

    @functools.cached_property
    def cell_coordinates(self) -> CellArray:
        return lazy_map(Broadcasting(Reindex(self.model.node_coordinates)), self.cell_nodes)

    @functools.cached_property
    def cell_map(self) -> CellArray:
        shapes = FillArray(self.geometry_reffe.shapes, self.num_cells)
        return lazy_map(LinearCombinationField, self.cell_coordinates, shapes)

    @functools.cached_property
    def cell_jacobian(self) -> CellArray:
        return lazy_map(gradient, self.cell_map)

    def __repr__(self) -> str:
        return f"Triangulation({self.topology.value}, cells={self.num_cells})"


class BoundaryTriangulation(Triangulation):
    """Facets carrying any of the given tags, each seen from its adjacent cell."""

    is_boundary = True

    def __init__(self, model: DiscreteModel, tags: Sequence[str] | str):
        self.model = model
        self.tags = (tags,) if isinstance(tags, str) else tuple(tags)
        self.parent = model.bulk
        self.facet_ids = model.tagged_facets(self.tags)
        self.cell_ids, self.local_facets = model.facet_parent(self.facet_ids)
        cell_topology = model.topology
        self.topology = cell_topology.facet_topology
        self.dim = self.topology.dim
        embeddings = [FacetEmbedding(*cell_topology.facet_embedding(lf)) for lf in range(len(cell_topology.facets))]
        normals = [cell_topology.reference_normal(lf) for lf in range(len(cell_topology.facets))]
        self.embeddings = CompressedArray(embeddings, self.local_facets)
        self.reference_normals = CompressedArray(normals, self.local_facets)

    @property
    def num_cells(self) -> int:
        return len(self.facet_ids)

    @functools.cached_property
    def cell_nodes(self) -> JaggedTable:
        nodes = self.model.facet_nodes
        rows = [nodes[f] for f in self.facet_ids]
        return JaggedTable.from_rows(rows, dtype=np.int64)

    def restrict(self, cell_array: Any) -> CellArray:
        """Values of a bulk cell array on the adjacent cell of every facet."""
        return lazy_map(Reindex(cell_array), self.cell_ids)

    @functools.cached_property
    def cell_map(self) -> CellArray:
        return lazy_map(compose, self.restrict(self.parent.cell_map), self.embeddings)

    @functools.cached_property
    def cell_jacobian(self) -> CellArray:
        return lazy_map(gradient, self.cell_map)

    @functools.cached_property
    def normals(self) -> CellArray:
        jacobians = self.restrict(self.parent.cell_jacobian)
        return lazy_map(unit_normal, jacobians, self.embeddings, self.reference_normals)

    def __repr__(self) -> str:
        return f"BoundaryTriangulation({self.topology.value}, tags={list(self.tags)}, facets={self.num_cells})"


def unit_normal(jacobian: Field, embedding: Field, reference_normal: np.ndarray) -> Field:
    """Outward unit normal ``G^-1 n_ref / |G^-1 n_ref|`` at facet points."""
    v = tensors.dot(tensors.inv(compose(jacobian, embedding)), reference_normal)
    return v / tensors.norm(v)


def bulk_triangulation(model: DiscreteModel) -> Triangulation:
    return model.bulk


def boundary_triangulation(model: DiscreteModel, tags: Sequence[str] | str = "boundary") -> BoundaryTriangulation:
    return BoundaryTriangulation(model, tags)


def cell_geometry(tri: Triangulation) -> tuple[CellArray, CellArray]:
    return tri.cell_map, tri.cell_jacobian


_SIMPLEX_SPLITS = {
    1: [(0, 1)],
    2: [(0, 1, 3), (0, 2, 3)],
    3: [(0, 1 << p[0], (1 << p[0]) + (1 << p[1]), 7) for p in itertools.permutations(range(3))],
}


def cartesian_model(
    origin: Sequence[float],
    extents: Sequence[float],
    partitions: Sequence[int],
    simplexify: bool = False,
) -> DiscreteModel:
    """Structured box mesh with lexicographic node and cell numbering.

    Facets get the tag "boundary" plus one tag per side ("xmin", "xmax", ...).
    With ``simplexify`` every n-cube is split into 2 triangles or 6 tetrahedra.
    """
    partitions = tuple(int(n) for n in partitions)
    origin = np.asarray(origin, dtype=float)
    extents = np.asarray(extents, dtype=float)
    dim = len(partitions)
    if dim not in (1, 2, 3) or len(origin) != dim or len(extents) != dim:
        raise ValueError("origin, extents and partitions must have the same length 1..3")
    if any(n < 1 for n in partitions):
        raise ValueError("partitions must be positive")
    if np.any(extents <= 0):
        raise ValueError("extents must be positive")

    axes = [np.linspace(o, o + e, n + 1) for o, e, n in zip(origin, extents, partitions)]
    grids = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.reshape(-1, order="F") for g in grids], axis=1)
    strides = np.cumprod([1] + [n + 1 for n in partitions[:-1]])
    corner = np.meshgrid(*[np.arange(n) for n in partitions], indexing="ij")
    base = sum(c.reshape(-1, order="F") * s for c, s in zip(corner, strides))
    offsets = np.array([sum(((v >> k) & 1) * strides[k] for k in range(dim)) for v in range(2**dim)])
    cells = base[:, None] + offsets[None, :]

    if simplexify and dim > 1:
        split = np.array(_SIMPLEX_SPLITS[dim])
        cells = cells[:, split].reshape(-1, dim + 1)
        topology = {2: CellTopology.TRI, 3: CellTopology.TET}[dim]
    else:
        topology = {1: CellTopology.SEG, 2: CellTopology.QUAD, 3: CellTopology.HEX}[dim]

    model = DiscreteModel(
        nodes,
        JaggedTable.from_dense(cells.astype(np.int64)),
        CompressedArray([topology], np.zeros(len(cells), dtype=np.int64)),
    )
    boundary = model.boundary_facets()
    model.add_tag("boundary", boundary)
    lattice = np.stack(np.unravel_index(np.arange(len(nodes)), [n + 1 for n in partitions], order="F"), axis=1)
    facet_nodes = model.facet_nodes.to_dense()[boundary]
    for k in range(dim):
        index = lattice[facet_nodes, k]
        model.add_tag(SIDE_TAGS[2 * k], boundary[np.all(index == 0, axis=1)])
        model.add_tag(SIDE_TAGS[2 * k + 1], boundary[np.all(index == partitions[k], axis=1)])
    logger.debug("cartesian model %s with %d cells", partitions, model.num_cells)
    return model
