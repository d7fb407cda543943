"""Cell-wise data on triangulations: points, fields, bases, measures and integrals.

A ``CellField`` is a lazy array with one Field per cell plus the triangulation
it lives on, the domain its fields take coordinates in and, for bases, the
role (test or trial) that decides how basis values are laid out. Operations
between cell fields on a bulk triangulation and one of its boundary
triangulations restrict the bulk operand to the boundary automatically.
"""
from __future__ import annotations

import enum
import operator
from dataclasses import dataclass
from typing import Any, Callable, Iterator

import numpy as np

from . import tensors
from .arrays import CachedBuffer, CellArray, FillArray, lazy_map, op_name
from .blocks import ArrayBlock, block_binary, block_make
from .errors import LengthMismatchError, ShapeError, TriangulationMismatchError
from .fields import ConstantField, EvalCache, Field, OperationField, as_field, compose, gradient
from .geometry import BoundaryTriangulation, Triangulation
from .maps import Map
from .quadrature import Quadrature, make_quadrature
from .reffe import ReferenceFE


class DomainStyle(enum.Enum):
    REFERENCE = "reference"
    PHYSICAL = "physical"


@dataclass(frozen=True)
class BasisRole:
    kind: str
    block: int | None = None
    num_blocks: int | None = None


class RoleShaped(Field):
    """Basis values laid out as a column (test) or a row (trial) of a cell matrix."""

    batch_ndim = 3

    def __init__(self, basis: Field, kind: str):
        if kind not in ("test", "trial"):
            raise ValueError(f"unknown basis role {kind!r}")
        self.basis = basis
        self.kind = kind
        self.num_basis = basis.num_basis

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        values = self.basis._evaluate(cache, xs)
        return values[:, :, None] if self.kind == "test" else values[:, None]

    def gradient(self) -> Field:
        return RoleShaped(self.basis.gradient(), self.kind)


class CellPoint:
    """Evaluation points per cell of a triangulation."""

    def __init__(self, points: CellArray, tri: Triangulation, domain: DomainStyle = DomainStyle.REFERENCE):
        if len(points) != tri.num_cells:
            raise LengthMismatchError(f"{len(points)} point lists for {tri.num_cells} cells")
        self.points = points
        self.tri = tri
        self.domain = domain

    @classmethod
    def reference(cls, tri: Triangulation, points: Any) -> "CellPoint":
        """The same reference points in every cell."""
        return cls(FillArray(np.asarray(points, dtype=float), tri.num_cells), tri, DomainStyle.REFERENCE)

    def __len__(self) -> int:
        return len(self.points)

    def to_physical(self) -> "CellPoint":
        if self.domain is DomainStyle.PHYSICAL:
            return self
        mapped = lazy_map(PointEvaluation(), self.tri.cell_map, self.points)
        return CellPoint(mapped, self.tri, DomainStyle.PHYSICAL)


class CellField:
    __operate_priority__ = 20
    __array_ufunc__ = None

    def __init__(
        self,
        cell_fields: CellArray,
        tri: Triangulation,
        domain: DomainStyle | None = DomainStyle.PHYSICAL,
        test: BasisRole | None = None,
        trial: BasisRole | None = None,
        source: "CellField | None" = None,
        transform: Callable[["CellField"], "CellField"] | None = None,
    ):
        if len(cell_fields) != tri.num_cells:
            raise LengthMismatchError(f"{len(cell_fields)} fields for {tri.num_cells} cells")
        self.cell_fields = cell_fields
        self.tri = tri
        self.domain = domain
        self.test = test
        self.trial = trial
        self.source = source
        self.transform = transform

    @classmethod
    def from_function(cls, tri: Triangulation, f: Any) -> "CellField":
        """A function of physical coordinates, the same in every cell."""
        return cls(FillArray(as_field(f), tri.num_cells), tri, DomainStyle.PHYSICAL)

    @property
    def signature(self) -> tuple:
        return (self.test, self.trial)

    def __len__(self) -> int:
        return len(self.cell_fields)

    def __call__(self, x: CellPoint) -> CellArray:
        return evaluate_cell(self, x)

    def gradient(self) -> "CellField":
        return gradient_cell(self)

    @staticmethod
    def __operate__(op: Callable, *args: Any) -> Any:
        return operate_cell(op, *args)

    def __add__(self, other: Any) -> Any:
        return tensors.add(self, other)

    def __radd__(self, other: Any) -> Any:
        return tensors.add(other, self)

    def __sub__(self, other: Any) -> Any:
        return tensors.sub(self, other)

    def __rsub__(self, other: Any) -> Any:
        return tensors.sub(other, self)

    def __mul__(self, other: Any) -> Any:
        return tensors.mul(self, other)

    def __rmul__(self, other: Any) -> Any:
        return tensors.mul(other, self)

    def __truediv__(self, other: Any) -> Any:
        return tensors.div(self, other)

    def __neg__(self) -> Any:
        return tensors.neg(self)

    def __repr__(self) -> str:
        role = "/".join(r.kind for r in self.signature if r is not None) or "none"
        domain = self.domain.value if self.domain else "any"
        return f"CellField({self.tri!r}, domain={domain}, role={role})"


def _terms(x: Any) -> list:
    return list(x.terms) if isinstance(x, TermSum) else [x]


class TermSum:
    """Sum of cell fields whose bases play different roles, integrated term by term."""

    __operate_priority__ = 30
    __array_ufunc__ = None

    def __init__(self, terms: list):
        self.terms = terms

    @staticmethod
    def __operate__(op: Callable, *args: Any) -> "TermSum":
        if op is tensors.add:
            return TermSum(_terms(args[0]) + _terms(args[1]))
        if op is tensors.sub:
            return TermSum(_terms(args[0]) + [-t for t in _terms(args[1])])
        if op is tensors.neg:
            return TermSum([-t for t in _terms(args[0])])
        if op is tensors.mul and len(args) == 2:
            a, b = args
            if np.ndim(a) == 0 and not isinstance(a, (CellField, TermSum)):
                return TermSum([a * t for t in _terms(b)])
            if np.ndim(b) == 0 and not isinstance(b, (CellField, TermSum)):
                return TermSum([t * b for t in _terms(a)])
        raise ShapeError(f"'{op_name(op)}' is not defined for sums of terms with different bases")

    def __add__(self, other: Any) -> "TermSum":
        return tensors.add(self, other)

    def __radd__(self, other: Any) -> "TermSum":
        return tensors.add(other, self)

    def __sub__(self, other: Any) -> "TermSum":
        return tensors.sub(self, other)

    def __rsub__(self, other: Any) -> "TermSum":
        return tensors.sub(other, self)

    def __mul__(self, other: Any) -> "TermSum":
        return tensors.mul(self, other)

    def __rmul__(self, other: Any) -> "TermSum":
        return tensors.mul(other, self)

    def __neg__(self) -> "TermSum":
        return tensors.neg(self)

    def __iter__(self) -> Iterator:
        return iter(self.terms)


def _common_triangulation(tris: list[Triangulation]) -> Triangulation:
    unique: list[Triangulation] = []
    for tri in tris:
        if not any(tri is u for u in unique):
            unique.append(tri)
    if len(unique) == 1:
        return unique[0]
    boundaries = [t for t in unique if t.is_boundary]
    if len(boundaries) == 1:
        target = boundaries[0]
        if all(t is target or t is target.parent for t in unique):
            return target
    raise TriangulationMismatchError(f"cannot combine cell data defined on {unique}")


def restrict(f: CellField, tri: BoundaryTriangulation) -> CellField:
    """Bulk cell field seen from the facets of a boundary triangulation."""
    fields = tri.restrict(f.cell_fields)
    if f.domain is DomainStyle.REFERENCE:
        fields = lazy_map(compose, fields, tri.embeddings)
    return CellField(fields, tri, f.domain, f.test, f.trial, source=f, transform=lambda g: restrict(g, tri))


def to_reference(f: CellField) -> CellField:
    fields = lazy_map(compose, f.cell_fields, f.tri.cell_map)
    return CellField(fields, f.tri, DomainStyle.REFERENCE, f.test, f.trial, source=f, transform=to_reference)


def reconcile(f: CellField, tri: Triangulation, domain: DomainStyle | None) -> CellField:
    out = f
    if f.tri is not tri:
        if tri.is_boundary and tri.parent is f.tri:
            out = restrict(f, tri)
        else:
            raise TriangulationMismatchError(f"{f.tri!r} is not {tri!r} nor its parent")
    if out.domain is DomainStyle.PHYSICAL and domain is DomainStyle.REFERENCE:
        out = to_reference(out)
    return out


def _as_cell_field(value: Any, tri: Triangulation) -> CellField:
    if isinstance(value, CellField):
        return value
    if isinstance(value, Field) or callable(value):
        return CellField.from_function(tri, value)
    return CellField(FillArray(ConstantField(value), tri.num_cells), tri, None)


class _Operate:
    def __init__(self, op: Callable):
        self.op = op
        self.name = op_name(op)

    def __call__(self, *fields: Field) -> OperationField:
        return OperationField(self.op, list(fields))


def _merge_role(roles: list[BasisRole]) -> BasisRole | None:
    if not roles:
        return None
    if len(roles) > 1:
        raise ShapeError(f"operation combines {len(roles)} {roles[0].kind} bases")
    return roles[0]


def operate_cell(op: Callable, *args: Any) -> Any:
    """Cell-wise ``op`` of cell fields (and plain fields or constants)."""
    cells = [a for a in args if isinstance(a, CellField)]
    if op in (tensors.add, tensors.sub) and len(args) == 2:
        signatures = {a.signature if isinstance(a, CellField) else (None, None) for a in args}
        if len(signatures) > 1:
            return TermSum.__operate__(op, TermSum([args[0]]), args[1])
    tri = _common_triangulation([c.tri for c in cells])
    domains = {c.domain for c in cells}
    if DomainStyle.REFERENCE in domains:
        domain = DomainStyle.REFERENCE
    elif DomainStyle.PHYSICAL in domains:
        domain = DomainStyle.PHYSICAL
    else:
        domain = None
    operands = [reconcile(_as_cell_field(a, tri), tri, domain) for a in args]
    if op in (tensors.add, tensors.sub):
        test, trial = operands[0].test, operands[0].trial
    else:
        test = _merge_role([o.test for o in operands if o.test is not None])
        trial = _merge_role([o.trial for o in operands if o.trial is not None])
    fields = lazy_map(_Operate(op), *(o.cell_fields for o in operands))
    return CellField(fields, tri, domain, test, trial)


def pullback_gradient(jacobian: Field, field: Field) -> Field:
    """Physical gradient ``inv(G) . grad_ref(f)`` of a reference-domain field."""
    return tensors.dot(tensors.inv(jacobian), gradient(field))


def gradient_cell(f: CellField) -> CellField:
    if f.source is not None:
        return f.transform(gradient_cell(f.source))
    if f.domain is DomainStyle.REFERENCE:
        if f.tri.is_boundary:
            raise ShapeError("gradients of reference-domain boundary fields need the bulk field")
        fields = lazy_map(pullback_gradient, f.tri.cell_jacobian, f.cell_fields)
    else:
        fields = lazy_map(gradient, f.cell_fields)
    return CellField(fields, f.tri, f.domain, f.test, f.trial)


def divergence_cell(f: CellField) -> CellField:
    return tensors.tr(gradient_cell(f))


class PointEvaluation(Map):
    """Evaluates a field at the points of a cell; test bases come out as ``(np, nb) + vs``."""

    name = "evaluate"

    def __init__(self, test_only: bool = False):
        self.test_only = test_only

    def return_cache(self, *args: Any) -> EvalCache:
        return EvalCache()

    def evaluate(self, cache: EvalCache | None, field: Field, points: Any) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        values = field._evaluate(cache, points[None, :] if single else points)
        if self.test_only:
            values = values[:, :, 0]
        return values[0] if single else values


def evaluate_cell(f: CellField, x: CellPoint) -> CellArray:
    if _common_triangulation([f.tri, x.tri]) is not x.tri:
        raise TriangulationMismatchError("points must live on the triangulation of the field or on its boundary")
    if x.domain is DomainStyle.PHYSICAL and f.domain is DomainStyle.REFERENCE:
        raise ValueError("reference-domain cell fields need reference points")
    g = reconcile(f, x.tri, x.domain)
    test_only = g.test is not None and g.trial is None
    return lazy_map(PointEvaluation(test_only), g.cell_fields, x.points)


def measure_density(jacobian: np.ndarray) -> np.ndarray:
    """|det G| for cells, sqrt(det(G G^T)) for facets; one value per point."""
    d, D = jacobian.shape[-2:]
    if d == 0:
        return np.ones(jacobian.shape[0])
    if d == D:
        return np.abs(tensors.det.kernel(jacobian, nbatch=1))
    metric = np.matmul(jacobian, np.swapaxes(jacobian, -1, -2))
    return np.sqrt(tensors.det.kernel(metric, nbatch=1))


def _wrap_blocks(value: np.ndarray, test: BasisRole | None, trial: BasisRole | None) -> Any:
    blocked = [r for r in (test, trial) if r is not None and r.block is not None]
    if not blocked:
        return value
    if test is not None and trial is not None:
        if test.block is None or trial.block is None:
            raise ShapeError("single-field and multi-field bases cannot share a cell matrix")
        return block_make((test.num_blocks, trial.num_blocks), [((test.block, trial.block), value)])
    role = blocked[0]
    return block_make(role.num_blocks, [(role.block, value)])


class CellIntegral(Map):
    """Quadrature sum ``sum_q f(x_q) w_q density(x_q)`` of one cell."""

    name = "integrate"

    def __init__(self, quadrature: Quadrature, test: BasisRole | None = None, trial: BasisRole | None = None):
        self.quadrature = quadrature
        self.test = test
        self.trial = trial

    def return_cache(self, *args: Any) -> tuple[EvalCache, CachedBuffer]:
        return EvalCache(), CachedBuffer()

    def evaluate(self, cache: tuple | None, field: Field, jacobian: Field) -> Any:
        memo, buffer = cache if cache is not None else self.return_cache()
        xs = self.quadrature.points
        values = field._evaluate(memo, xs)
        weights = self.quadrature.weights * measure_density(jacobian._evaluate(memo, xs))
        out = buffer.resize(values.shape[1:])
        np.einsum("q,q...->...", weights, values, out=out)
        if self.test is not None and self.trial is None:
            out = out[:, 0]
        elif self.trial is not None and self.test is None:
            out = out[0]
        return _wrap_blocks(out, self.test, self.trial)


class Measure:
    """Quadrature of a given degree on every cell of a triangulation."""

    def __init__(self, tri: Triangulation, degree: int):
        self.tri = tri
        self.degree = int(degree)
        self.quadrature = make_quadrature(tri.topology, degree)
        self.points = CellPoint.reference(tri, self.quadrature.points)
        self.weights = FillArray(self.quadrature.weights, tri.num_cells)

    def integrate(self, f: Any) -> "DomainContribution":
        return integrate(f, self)

    def __repr__(self) -> str:
        return f"Measure({self.tri!r}, degree={self.degree})"


def add_cell_values(a: Any, b: Any) -> Any:
    if isinstance(a, ArrayBlock):
        return block_binary(operator.add, a, b)
    return a + b


def sub_cell_values(a: Any, b: Any) -> Any:
    if isinstance(a, ArrayBlock):
        return block_binary(operator.sub, a, b)
    return a - b


def neg_cell_value(a: Any) -> Any:
    return -a


class _Scale:
    name = "scale"

    def __init__(self, factor: float):
        self.factor = factor

    def __call__(self, a: Any) -> Any:
        return a * self.factor


class DomainContribution:
    """Per-cell integrals keyed by the triangulation they were computed on."""

    def __init__(self, entries: dict | None = None):
        self._entries: dict[int, tuple[Triangulation, CellArray]] = {}
        for tri, values in (entries or {}).items():
            self._store(tri, values)

    def _store(self, tri: Triangulation, values: CellArray) -> None:
        if len(values) != tri.num_cells:
            raise LengthMismatchError(f"{len(values)} cell values for {tri.num_cells} cells")
        self._entries[id(tri)] = (tri, values)

    def __getitem__(self, tri: Triangulation) -> CellArray:
        entry = self._entries.get(id(tri))
        if entry is None or entry[0] is not tri:
            raise KeyError(f"no contribution on {tri!r}")
        return entry[1]

    def __contains__(self, tri: Triangulation) -> bool:
        entry = self._entries.get(id(tri))
        return entry is not None and entry[0] is tri

    def __len__(self) -> int:
        return len(self._entries)

    def triangulations(self) -> list[Triangulation]:
        return [tri for tri, _ in self._entries.values()]

    def items(self) -> list[tuple[Triangulation, CellArray]]:
        return list(self._entries.values())

    def _combine(self, other: "DomainContribution", op: Callable, lone: Callable | None) -> "DomainContribution":
        out = DomainContribution()
        for tri, values in self.items():
            out._store(tri, lazy_map(op, values, other[tri]) if tri in other else values)
        for tri, values in other.items():
            if tri not in self:
                out._store(tri, lazy_map(lone, values) if lone else values)
        return out

    def __add__(self, other: Any) -> "DomainContribution":
        if isinstance(other, (int, float)) and other == 0:
            return self
        return self._combine(other, add_cell_values, None)

    __radd__ = __add__

    def __sub__(self, other: "DomainContribution") -> "DomainContribution":
        return self._combine(other, sub_cell_values, neg_cell_value)

    def __neg__(self) -> "DomainContribution":
        return DomainContribution({tri: lazy_map(neg_cell_value, v) for tri, v in self.items()})

    def __mul__(self, factor: float) -> "DomainContribution":
        return DomainContribution({tri: lazy_map(_Scale(float(factor)), v) for tri, v in self.items()})

    __rmul__ = __mul__

    def sum(self) -> float:
        """Total of a scalar integral over every triangulation."""
        return float(sum(float(np.sum(value)) for _, values in self.items() for value in values))


def integrate(f: Any, measure: Measure) -> DomainContribution:
    if isinstance(f, TermSum):
        total = DomainContribution()
        for term in f:
            total = total + integrate(term, measure)
        return total
    tri = measure.tri
    g = reconcile(_as_cell_field(f, tri), tri, DomainStyle.REFERENCE)
    values = lazy_map(CellIntegral(measure.quadrature, g.test, g.trial), g.cell_fields, tri.cell_jacobian)
    return DomainContribution({tri: values})


def cell_basis(
    tri: Triangulation,
    reffe: ReferenceFE,
    kind: str = "test",
    block: int | None = None,
    num_blocks: int | None = None,
) -> CellField:
    if tri.is_boundary:
        raise TriangulationMismatchError("bases are defined on bulk triangulations")
    role = BasisRole(kind, block, num_blocks)
    shaped = FillArray(RoleShaped(reffe.shapes, kind), tri.num_cells)
    if kind == "test":
        return CellField(shaped, tri, DomainStyle.REFERENCE, test=role)
    return CellField(shaped, tri, DomainStyle.REFERENCE, trial=role)


def normal_vector(tri: BoundaryTriangulation) -> CellField:
    return CellField(tri.normals, tri, DomainStyle.REFERENCE)
