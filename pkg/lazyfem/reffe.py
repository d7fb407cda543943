from __future__ import annotations

import functools
import itertools
import warnings
from enum import Enum
from typing import Any

import numpy as np
import scipy.linalg

from .errors import IllPosedElementError, UnsupportedElementError
from .fields import FieldBasis, LinearCombinationBasis, MonomialBasis, as_field, linear_combination, monomial_basis

MAX_ORDER = 4

_HEX_EDGES = ((0, 1), (2, 3), (4, 5), (6, 7), (0, 2), (1, 3), (4, 6), (5, 7), (0, 4), (1, 5), (2, 6), (3, 7))
_HEX_FACETS = ((0, 1, 2, 3), (4, 5, 6, 7), (0, 1, 4, 5), (2, 3, 6, 7), (0, 2, 4, 6), (1, 3, 5, 7))
_TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_TET_FACETS = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))

_TOPOLOGY_DATA: dict[str, dict[str, Any]] = {
    "VERTEX": dict(dim=0, simplex=True, vertices=[[]], edges=(), facets=(), facet="VERTEX"),
    "SEG": dict(dim=1, simplex=True, vertices=[[0], [1]], edges=((0, 1),), facets=((0,), (1,)), facet="VERTEX"),
    "TRI": dict(
        dim=2, simplex=True, vertices=[[0, 0], [1, 0], [0, 1]],
        edges=((0, 1), (0, 2), (1, 2)), facets=((0, 1), (0, 2), (1, 2)), facet="SEG",
    ),
    "QUAD": dict(
        dim=2, simplex=False, vertices=[[0, 0], [1, 0], [0, 1], [1, 1]],
        edges=((0, 1), (2, 3), (0, 2), (1, 3)), facets=((0, 1), (2, 3), (0, 2), (1, 3)), facet="SEG",
    ),
    "TET": dict(
        dim=3, simplex=True, vertices=[[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
        edges=_TET_EDGES, facets=_TET_FACETS, facet="TRI",
    ),
    "HEX": dict(
        dim=3, simplex=False,
        vertices=[[i & 1, (i >> 1) & 1, (i >> 2) & 1] for i in range(8)],
        edges=_HEX_EDGES, facets=_HEX_FACETS, facet="QUAD",
    ),
}


class CellTopology(Enum):
    VERTEX = "VERTEX"
    SEG = "SEG"
    TRI = "TRI"
    QUAD = "QUAD"
    TET = "TET"
    HEX = "HEX"

    @classmethod
    def from_name(cls, name: Any) -> "CellTopology":
        if isinstance(name, CellTopology):
            return name
        try:
            return cls(str(name).upper())
        except ValueError as exc:
            raise UnsupportedElementError(f"unknown cell topology {name!r}") from exc

    @property
    def _data(self) -> dict[str, Any]:
        return _TOPOLOGY_DATA[self.value]

    @property
    def dim(self) -> int:
        return self._data["dim"]

    @property
    def is_simplex(self) -> bool:
        return self._data["simplex"]

    @property
    def vertices(self) -> np.ndarray:
        return np.array(self._data["vertices"], dtype=float).reshape(-1, self.dim)

    @property
    def num_vertices(self) -> int:
        return len(self._data["vertices"])

    @property
    def edges(self) -> tuple:
        return self._data["edges"]

    @property
    def facets(self) -> tuple:
        return self._data["facets"]

    @property
    def facet_topology(self) -> "CellTopology":
        return CellTopology(self._data["facet"])

    @property
    def measure(self) -> float:
        if self.is_simplex:
            return 1.0 / float(np.prod(np.arange(1, self.dim + 1)))
        return 1.0

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def entities(self, dim: int) -> tuple:
        if dim == 0:
            return tuple((v,) for v in range(self.num_vertices))
        if dim == self.dim:
            return (tuple(range(self.num_vertices)),)
        if dim == 1:
            return self.edges
        if dim == self.dim - 1:
            return self.facets
        raise ValueError(f"{self.value} has no entities of dimension {dim}")

    def facet_embedding(self, lf: int) -> tuple[np.ndarray, np.ndarray]:
        """Affine map ``xi -> origin + E @ xi`` from facet reference coordinates into the cell."""
        verts = self.vertices[list(self.facets[lf])]
        origin = verts[0]
        tangents = verts[1:self.dim] - origin
        return origin, tangents.T.reshape(self.dim, self.dim - 1)

    def reference_normal(self, lf: int) -> np.ndarray:
        verts = self.vertices[list(self.facets[lf])]
        if self.dim == 1:
            normal = np.ones(1)
        elif self.dim == 2:
            t = verts[1] - verts[0]
            normal = np.array([t[1], -t[0]])
        else:
            normal = np.cross(verts[1] - verts[0], verts[2] - verts[0])
        if np.dot(normal, verts.mean(axis=0) - self.centroid) < 0:
            normal = -normal
        return normal / np.linalg.norm(normal)


def lattice(topology: CellTopology, order: int) -> np.ndarray:
    """Integer coordinates of the equispaced node lattice of the given order."""
    dim = topology.dim
    grid = np.indices((order + 1,) * dim).reshape(dim, -1).T
    if topology.is_simplex:
        grid = grid[grid.sum(axis=1) <= order]
    return grid


def _owner(topology: CellTopology, point: np.ndarray, order: int) -> tuple[int, int]:
    if topology.is_simplex:
        bary = np.concatenate([[order - point.sum()], point])
        support = {a for a in range(len(bary)) if bary[a] > 0}
        dim = len(support) - 1
    else:
        support = set()
        for v, vertex in enumerate(topology.vertices.astype(int)):
            if all(p not in (0, order) or p == vertex[k] * order for k, p in enumerate(point)):
                support.add(v)
        dim = int(sum(1 for p in point if 0 < p < order))
    for lid, entity in enumerate(topology.entities(dim)):
        if set(entity) == support:
            return dim, lid
    raise UnsupportedElementError(f"node {point} has no owning entity in {topology.value}")


class LagrangianDofBasis:
    """Point evaluations at nodes; vector DOFs are numbered node-major, component-minor."""

    def __init__(self, nodes: Any, value_shape: tuple = ()):
        self.nodes = np.asarray(nodes, dtype=float)
        self.value_shape = tuple(value_shape)
        self.num_components = self.value_shape[0] if self.value_shape else 1
        self.num_dofs = len(self.nodes) * self.num_components

    def evaluate(self, f: Any) -> np.ndarray:
        f = as_field(f)
        values = f._evaluate(None, self.nodes)
        if f.batch_ndim == 1:
            return values.reshape(-1) if self.value_shape else values
        if not self.value_shape:
            return values
        return np.transpose(values, (0, 2, 1)).reshape(self.num_dofs, -1)


def change_of_basis(dofs: LagrangianDofBasis, prebasis: FieldBasis) -> LinearCombinationBasis:
    matrix = dofs.evaluate(prebasis)
    if matrix.shape[0] != matrix.shape[1]:
        raise IllPosedElementError(f"{matrix.shape[0]} DOFs for {matrix.shape[1]} basis functions")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-13 * pivots.max():
        raise IllPosedElementError("DOF matrix of the element is singular")
    inverse = scipy.linalg.lu_solve((lu, piv), np.eye(len(matrix)))
    return linear_combination(inverse, prebasis)


class ReferenceFE:
    """Lagrangian reference element: topology, shape functions and nodal DOFs."""

    def __init__(self, topology: CellTopology, order: int, value_shape: tuple = ()):
        self.topology = topology
        self.order = order
        self.value_shape = tuple(value_shape)
        self.num_components = self.value_shape[0] if self.value_shape else 1
        points = lattice(topology, order)
        owners = [_owner(topology, p, order) for p in points]
        vertices = topology.vertices * order

        def sort_key(k: int) -> tuple:
            dim, lid = owners[k]
            first = vertices[topology.entities(dim)[lid][0]]
            return (dim, lid, float(np.abs(points[k] - first).sum()), tuple(points[k]))

        order_ = sorted(range(len(points)), key=sort_key)
        self.node_coordinates = points[order_].astype(float) / order
        self.node_owners = [owners[k] for k in order_]
        self.entity_nodes: dict[tuple[int, int], list[int]] = {}
        for n, owner in enumerate(self.node_owners):
            self.entity_nodes.setdefault(owner, []).append(n)
        self.prebasis: MonomialBasis = monomial_basis(
            topology.dim, order, "P" if topology.is_simplex else "Q", self.value_shape, center=topology.centroid
        )
        self.dof_basis = LagrangianDofBasis(self.node_coordinates, self.value_shape)
        self.shapes = change_of_basis(self.dof_basis, self.prebasis)

    @property
    def num_nodes(self) -> int:
        return len(self.node_coordinates)

    @property
    def num_dofs(self) -> int:
        return self.num_nodes * self.num_components

    @property
    def dof_to_node(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_nodes), self.num_components)

    @property
    def dof_to_component(self) -> np.ndarray:
        return np.tile(np.arange(self.num_components), self.num_nodes)

    def __repr__(self) -> str:
        return f"ReferenceFE({self.topology.value}, order={self.order}, value_shape={self.value_shape})"


@functools.lru_cache(maxsize=None)
def _cached_reffe(topology: CellTopology, order: int, value_shape: tuple) -> ReferenceFE:
    return ReferenceFE(topology, order, value_shape)


def make_reference_fe(topology: Any, order: int, value_shape: Any = ()) -> ReferenceFE:
    topology = CellTopology.from_name(topology)
    if topology is CellTopology.VERTEX:
        raise UnsupportedElementError("no Lagrangian element on a vertex")
    if not 1 <= int(order) <= MAX_ORDER:
        raise UnsupportedElementError(f"Lagrangian order {order} not in 1..{MAX_ORDER}")
    value_shape = tuple(int(s) for s in np.atleast_1d(value_shape))
    if len(value_shape) > 1 or (value_shape and not 1 <= value_shape[0] <= 3):
        raise UnsupportedElementError(f"unsupported value shape {value_shape}")
    return _cached_reffe(topology, int(order), value_shape)


def geometry_reffe(topology: Any) -> ReferenceFE:
    return make_reference_fe(topology, 1)


def entity_subsets(vertices: tuple) -> list[tuple]:
    """All sorted vertex subsets of an entity, used to test closure membership."""
    out = []
    for size in range(1, len(vertices) + 1):
        out.extend(tuple(sorted(c)) for c in itertools.combinations(vertices, size))
    return out
