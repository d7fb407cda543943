"""Fields: functions of physical (or reference) points, their algebra and gradients.

Point arrays have shape ``(npoints, D)``. A field evaluated on them returns
``(npoints,) + value_shape``; a basis returns ``(npoints, nbasis) + value_shape``.
The number of leading axes that are not part of the value is ``batch_ndim``.

Gradients follow the transpose-of-derivative convention:
``gradient(u)[..., i, j] == d u_j / d x_i``.
"""
from __future__ import annotations

from typing import Any, Callable, Sequence

import numpy as np

from . import tensors
from .errors import ShapeError
from .maps import Map


class EvalCache:
    """Per-consumer memo of basis evaluations keyed by field and point array identity."""

    __slots__ = ("memo",)

    def __init__(self) -> None:
        self.memo: dict[tuple[int, int], tuple] = {}

    def lookup(self, field: "Field", xs: np.ndarray) -> np.ndarray | None:
        entry = self.memo.get((id(field), id(xs)))
        if entry is not None and entry[0] is field and entry[1] is xs:
            return entry[2]
        return None

    def store(self, field: "Field", xs: np.ndarray, value: np.ndarray) -> None:
        if len(self.memo) > 64:
            self.memo.clear()
        self.memo[(id(field), id(xs))] = (field, xs, value)


def _expand(value: np.ndarray, batch: int, target: int) -> np.ndarray:
    if batch == target:
        return value
    return value.reshape(value.shape[:batch] + (1,) * (target - batch) + value.shape[batch:])


def _defers_to(self: Any, other: Any) -> bool:
    return getattr(type(other), "__operate_priority__", 0) > type(self).__operate_priority__


class Field(Map):
    batch_ndim = 1
    memoize = False
    __operate_priority__ = 10
    __array_ufunc__ = None

    def return_cache(self, *args: Any) -> EvalCache:
        return EvalCache()

    def evaluate(self, cache: EvalCache | None, x: Any) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self._evaluate(cache, x[None, :])[0]
        return self._evaluate(cache, x)

    def _evaluate(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        if self.memoize and cache is not None:
            hit = cache.lookup(self, xs)
            if hit is not None:
                return hit
            value = self._eval(cache, xs)
            cache.store(self, xs, value)
            return value
        return self._eval(cache, xs)

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self) -> "Field":
        raise NotImplementedError(f"{type(self).__name__} has no gradient")

    @staticmethod
    def __operate__(op: Callable, *args: Any) -> "OperationField":
        return OperationField(op, [as_field(a) for a in args])

    def __add__(self, other: Any) -> Any:
        return NotImplemented if _defers_to(self, other) else tensors.add(self, other)

    def __radd__(self, other: Any) -> Any:
        return tensors.add(other, self)

    def __sub__(self, other: Any) -> Any:
        return NotImplemented if _defers_to(self, other) else tensors.sub(self, other)

    def __rsub__(self, other: Any) -> Any:
        return tensors.sub(other, self)

    def __mul__(self, other: Any) -> Any:
        return NotImplemented if _defers_to(self, other) else tensors.mul(self, other)

    def __rmul__(self, other: Any) -> Any:
        return tensors.mul(other, self)

    def __truediv__(self, other: Any) -> Any:
        return NotImplemented if _defers_to(self, other) else tensors.div(self, other)

    def __neg__(self) -> Any:
        return tensors.neg(self)


def as_field(value: Any) -> Field:
    if isinstance(value, Field):
        return value
    if callable(value):
        return GenericField(value)
    return ConstantField(value)


class ConstantField(Field):
    def __init__(self, value: Any):
        self.value = np.asarray(value, dtype=float)

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.value, (xs.shape[0],) + self.value.shape)

    def gradient(self) -> Field:
        return _ZeroGradient(self.value.shape, 1)


class _ZeroGradient(Field):
    def __init__(self, value_shape: tuple, order: int):
        self.value_shape = tuple(value_shape)
        self.order = order

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        dim = xs.shape[1]
        return np.zeros((xs.shape[0],) + (dim,) * self.order + self.value_shape)

    def gradient(self) -> Field:
        return _ZeroGradient(self.value_shape, self.order + 1)


def _stack_values(result: Any, npoints: int) -> np.ndarray:
    if isinstance(result, (list, tuple)):
        return np.stack([_stack_values(c, npoints) for c in result], axis=1)
    value = np.asarray(result, dtype=float)
    if value.ndim >= 2:
        return np.moveaxis(value, -1, 0)
    return np.broadcast_to(value, (npoints,))


class GenericField(Field):
    """Wraps ``func(x)`` where ``x[k]`` is the array of k-th coordinates.

    ``func`` must use numpy operations so it accepts dual numbers when no
    analytic ``grad`` is given.
    """

    def __init__(self, func: Callable, grad: Callable | None = None):
        self.func = func
        self.grad = grad

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        return _stack_values(self.func(xs.T), xs.shape[0])

    def gradient(self) -> Field:
        if self.grad is not None:
            return GenericField(self.grad)
        return ADGradientField(self.func)


class DualArray:
    """Forward-mode dual numbers over a point array: value ``(n,)``, partials ``(D, n)``."""

    __array_priority__ = 100

    def __init__(self, value: Any, partials: Any):
        self.value = np.asarray(value, dtype=float)
        self.partials = np.asarray(partials, dtype=float)

    def _lift(self, other: Any) -> "DualArray":
        if isinstance(other, DualArray):
            return other
        value = np.broadcast_to(np.asarray(other, dtype=float), self.value.shape)
        return DualArray(value, np.zeros_like(self.partials))

    def __add__(self, other: Any) -> "DualArray":
        o = self._lift(other)
        return DualArray(self.value + o.value, self.partials + o.partials)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "DualArray":
        o = self._lift(other)
        return DualArray(self.value - o.value, self.partials - o.partials)

    def __rsub__(self, other: Any) -> "DualArray":
        return self._lift(other) - self

    def __mul__(self, other: Any) -> "DualArray":
        o = self._lift(other)
        return DualArray(self.value * o.value, self.partials * o.value + self.value * o.partials)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "DualArray":
        o = self._lift(other)
        return DualArray(
            self.value / o.value,
            (self.partials * o.value - self.value * o.partials) / o.value**2,
        )

    def __rtruediv__(self, other: Any) -> "DualArray":
        return self._lift(other) / self

    def __pow__(self, exponent: Any) -> "DualArray":
        if isinstance(exponent, DualArray):
            return np.exp(exponent * np.log(self))
        p = np.asarray(exponent, dtype=float)
        if np.all(p == 0):
            return DualArray(np.ones_like(self.value), np.zeros_like(self.partials))
        return DualArray(self.value**p, p * self.value ** (p - 1) * self.partials)

    def __rpow__(self, base: Any) -> "DualArray":
        b = np.asarray(base, dtype=float)
        value = b**self.value
        return DualArray(value, np.log(b) * value * self.partials)

    def __neg__(self) -> "DualArray":
        return DualArray(-self.value, -self.partials)

    def __pos__(self) -> "DualArray":
        return self

    def _unary(self, value: np.ndarray, slope: np.ndarray) -> "DualArray":
        return DualArray(value, slope * self.partials)

    def __array_ufunc__(self, ufunc: np.ufunc, method: str, *inputs: Any, **kwargs: Any) -> Any:
        if method != "__call__" or kwargs.get("out") is not None:
            return NotImplemented
        binary = {
            np.add: lambda a, b: a + b,
            np.subtract: lambda a, b: a - b,
            np.multiply: lambda a, b: a * b,
            np.true_divide: lambda a, b: a / b,
            np.power: lambda a, b: a**b,
        }
        if ufunc in binary:
            a, b = inputs
            if not isinstance(a, DualArray):
                if ufunc is np.power:
                    return b.__rpow__(a)
                a = b._lift(a)
            return binary[ufunc](a, b)
        x = inputs[0]
        v = x.value
        if ufunc is np.negative:
            return -x
        if ufunc is np.sin:
            return x._unary(np.sin(v), np.cos(v))
        if ufunc is np.cos:
            return x._unary(np.cos(v), -np.sin(v))
        if ufunc is np.tan:
            return x._unary(np.tan(v), 1.0 / np.cos(v) ** 2)
        if ufunc is np.exp:
            e = np.exp(v)
            return x._unary(e, e)
        if ufunc is np.log:
            return x._unary(np.log(v), 1.0 / v)
        if ufunc is np.sqrt:
            s = np.sqrt(v)
            return x._unary(s, 0.5 / s)
        if ufunc is np.tanh:
            t = np.tanh(v)
            return x._unary(t, 1.0 - t * t)
        if ufunc is np.square:
            return x._unary(v * v, 2.0 * v)
        if ufunc is np.absolute:
            return x._unary(np.abs(v), np.sign(v))
        return NotImplemented


def _stack_gradients(result: Any, npoints: int, dim: int) -> np.ndarray:
    if isinstance(result, (list, tuple)):
        return np.stack([_stack_gradients(c, npoints, dim) for c in result], axis=2)
    if isinstance(result, DualArray):
        return np.broadcast_to(result.partials.T, (npoints, dim))
    return np.zeros((npoints, dim))


class ADGradientField(Field):
    """Gradient of a coordinate function by one vectorised dual-number pass."""

    def __init__(self, func: Callable):
        self.func = func

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        npoints, dim = xs.shape
        seeds = []
        for k in range(dim):
            partials = np.zeros((dim, npoints))
            partials[k] = 1.0
            seeds.append(DualArray(xs[:, k], partials))
        return _stack_gradients(self.func(tuple(seeds)), npoints, dim)

    def gradient(self) -> Field:
        raise NotImplementedError("second derivatives need an analytic gradient to differentiate")


class OperationField(Field):
    """Pointwise ``op(f1(x), ..., fn(x))``."""

    def __init__(self, op: Callable, fields: Sequence[Field]):
        self.op = op
        self.fields = list(fields)
        self.batch_ndim = max(f.batch_ndim for f in self.fields)

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        target = self.batch_ndim
        values = [_expand(f._evaluate(cache, xs), f.batch_ndim, target) for f in self.fields]
        kernel = getattr(self.op, "kernel", None)
        if kernel is None:
            return self.op(*values)
        return kernel(*values, nbatch=target)

    def gradient(self) -> Field:
        if self.op not in _DERIVATIVE_RULES:
            name = getattr(self.op, "__name__", repr(self.op))
            raise NotImplementedError(f"gradient of a '{name}' operation is not available")
        return _OperationGradient(self)


def _linear_rule(op: Callable) -> Callable:
    def rule(values: list, deltas: list, nbatch: int) -> np.ndarray:
        return op.kernel(*deltas, nbatch=nbatch)

    return rule


def _bilinear_rule(op: Callable) -> Callable:
    def rule(values: list, deltas: list, nbatch: int) -> np.ndarray:
        (a, b), (da, db) = values, deltas
        return op.kernel(da, b, nbatch=nbatch) + op.kernel(a, db, nbatch=nbatch)

    return rule


def _quotient_rule(values: list, deltas: list, nbatch: int) -> np.ndarray:
    (a, b), (da, db) = values, deltas
    ratio = tensors.div.kernel(a, b, nbatch=nbatch)
    numerator = tensors.sub.kernel(da, tensors.mul.kernel(ratio, db, nbatch=nbatch), nbatch=nbatch)
    return tensors.div.kernel(numerator, b, nbatch=nbatch)


def _det_rule(values: list, deltas: list, nbatch: int) -> np.ndarray:
    (a,), (da,) = values, deltas
    cofactor = tensors.transpose.kernel(tensors.inv.kernel(a, nbatch=nbatch), nbatch=nbatch)
    return tensors.det.kernel(a, nbatch=nbatch) * tensors.inner.kernel(cofactor, da, nbatch=nbatch)


def _inv_rule(values: list, deltas: list, nbatch: int) -> np.ndarray:
    (a,), (da,) = values, deltas
    ai = tensors.inv.kernel(a, nbatch=nbatch)
    return -tensors.dot.kernel(tensors.dot.kernel(ai, da, nbatch=nbatch), ai, nbatch=nbatch)


def _norm_rule(values: list, deltas: list, nbatch: int) -> np.ndarray:
    (a,), (da,) = values, deltas
    if a.ndim == nbatch:
        return np.sign(a) * da
    return tensors.inner.kernel(a, da, nbatch=nbatch) / tensors.norm.kernel(a, nbatch=nbatch)


# Directional derivative of each kernel: rule(values, deltas, nbatch) with
# deltas the derivatives of the operands along one coordinate.
_DERIVATIVE_RULES: dict[Callable, Callable] = {
    tensors.add: _linear_rule(tensors.add),
    tensors.sub: _linear_rule(tensors.sub),
    tensors.neg: _linear_rule(tensors.neg),
    tensors.transpose: _linear_rule(tensors.transpose),
    tensors.tr: _linear_rule(tensors.tr),
    tensors.mul: _bilinear_rule(tensors.mul),
    tensors.dot: _bilinear_rule(tensors.dot),
    tensors.inner: _bilinear_rule(tensors.inner),
    tensors.outer: _bilinear_rule(tensors.outer),
    tensors.div: _quotient_rule,
    tensors.det: _det_rule,
    tensors.inv: _inv_rule,
    tensors.norm: _norm_rule,
}


class _OperationGradient(Field):
    """Gradient of an OperationField, one directional derivative per coordinate."""

    def __init__(self, f: OperationField):
        self.f = f
        self.rule = _DERIVATIVE_RULES[f.op]
        self.grads = [g.gradient() for g in f.fields]
        self.batch_ndim = f.batch_ndim

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        target = self.batch_ndim
        fields = self.f.fields
        values = [_expand(g._evaluate(cache, xs), g.batch_ndim, target) for g in fields]
        grads = [g._evaluate(cache, xs) for g in self.grads]
        directions = []
        for k in range(xs.shape[1]):
            deltas = [_expand(np.take(dg, k, axis=g.batch_ndim), g.batch_ndim, target) for g, dg in zip(fields, grads)]
            directions.append(self.rule(values, deltas, target))
        shape = np.broadcast_shapes(*(d.shape for d in directions))
        return np.stack([np.broadcast_to(d, shape) for d in directions], axis=target)


class ComposedField(Field):
    """``(f o h)(x) = f(h(x))``."""

    def __init__(self, f: Field, h: Field):
        self.f = f
        self.h = h
        self.batch_ndim = f.batch_ndim

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        return self.f._evaluate(cache, self.h._evaluate(cache, xs))

    def gradient(self) -> Field:
        return _ChainRuleGradient(self.f, self.h)


class _ChainRuleGradient(Field):
    def __init__(self, f: Field, h: Field):
        self.f = f
        self.h = h
        self.batch_ndim = f.batch_ndim

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        gh = self.h.gradient()._evaluate(cache, xs)
        gf = self.f.gradient()._evaluate(cache, self.h._evaluate(cache, xs))
        batch = self.batch_ndim
        inner = gf.shape[batch]
        gh = _expand(gh, 1, batch)
        flat = gf.reshape(gf.shape[:batch] + (inner, -1))
        out = np.matmul(gh, flat)
        return out.reshape(out.shape[:batch] + (gh.shape[-2],) + gf.shape[batch + 1:])


class FieldBasis(Field):
    """A vector of fields evaluated together."""

    batch_ndim = 2
    memoize = True
    num_basis = 0
    dim = 0
    is_affine = False

    def __len__(self) -> int:
        return self.num_basis

    def __getitem__(self, j: int) -> Field:
        if not 0 <= j < self.num_basis:
            raise IndexError(f"basis member {j} out of range")
        return _BasisMember(self, j)


class _BasisMember(Field):
    def __init__(self, basis: FieldBasis, j: int):
        self.basis = basis
        self.j = j

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        return self.basis._evaluate(cache, xs)[:, self.j]

    def gradient(self) -> Field:
        return _BasisMember(self.basis.gradient(), self.j)


class MonomialBasis(FieldBasis):
    """Monomials ``prod_k (x_k - c_k)^e_k``; vector bases repeat each monomial per component."""

    def __init__(self, dim: int, exponents: Any, value_shape: tuple = (), center: Any = None):
        self.dim = int(dim)
        self.exponents = np.asarray(exponents, dtype=np.int64).reshape(-1, self.dim)
        self.value_shape = tuple(value_shape)
        self.num_components = self.value_shape[0] if self.value_shape else 1
        self.center = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        self.num_basis = len(self.exponents) * self.num_components
        self.is_affine = bool(self.exponents.sum(axis=1).max(initial=0) <= 1)
        self._gradient: Field | None = None

    def scalar_values(self, xs: np.ndarray) -> np.ndarray:
        y = xs - self.center
        return np.prod(y[:, None, :] ** self.exponents[None, :, :], axis=2)

    def _replicate(self, values: np.ndarray, middle: tuple) -> np.ndarray:
        if not self.value_shape:
            return values
        nc = self.num_components
        npoints, nm = values.shape[:2]
        out = np.zeros((npoints, nm, nc) + middle + (nc,))
        for c in range(nc):
            out[:, :, c, ..., c] = values
        return out.reshape((npoints, nm * nc) + middle + (nc,))

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        return self._replicate(self.scalar_values(xs), ())

    def gradient(self) -> Field:
        if self._gradient is None:
            self._gradient = _MonomialGradient(self)
        return self._gradient


class _MonomialGradient(FieldBasis):
    def __init__(self, basis: MonomialBasis):
        self.basis = basis
        self.dim = basis.dim
        self.num_basis = basis.num_basis

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        b = self.basis
        y = xs - b.center
        grads = np.empty((xs.shape[0], len(b.exponents), b.dim))
        for k in range(b.dim):
            lowered = b.exponents.copy()
            lowered[:, k] = np.maximum(lowered[:, k] - 1, 0)
            grads[:, :, k] = b.exponents[:, k] * np.prod(y[:, None, :] ** lowered[None], axis=2)
        return b._replicate(grads, (b.dim,))

    def gradient(self) -> Field:
        raise NotImplementedError("second derivatives of monomial bases are not available")


def monomial_exponents(dim: int, order: int, filter: str = "P") -> np.ndarray:
    if dim not in (1, 2, 3) or order < 0:
        raise ShapeError("monomial bases need dim in 1..3 and order >= 0")
    if filter not in ("P", "Q"):
        raise ValueError(f"unknown monomial filter {filter!r}")
    grid = np.indices((order + 1,) * dim).reshape(dim, -1).T
    keep = grid.sum(axis=1) <= order if filter == "P" else grid.max(axis=1) <= order
    kept = [tuple(int(e) for e in row) for row in grid[keep]]
    kept.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return np.array(kept, dtype=np.int64).reshape(-1, dim)


def monomial_basis(dim: int, order: int, filter: str = "P", value_shape: tuple = (), center: Any = None) -> MonomialBasis:
    return MonomialBasis(dim, monomial_exponents(dim, order, filter), value_shape, center)


class LinearCombinationBasis(FieldBasis):
    """Member ``j`` is ``sum_m coeffs[m, j] * basis[m]``."""

    def __init__(self, coeffs: Any, basis: FieldBasis):
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.ndim != 2 or self.coeffs.shape[0] != basis.num_basis:
            raise ShapeError(f"coefficient matrix {self.coeffs.shape} does not match {basis.num_basis} fields")
        self.basis = basis
        self.dim = basis.dim
        self.num_basis = self.coeffs.shape[1]
        self.is_affine = basis.is_affine
        self._gradient: Field | None = None

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        values = self.basis._evaluate(cache, xs)
        return np.moveaxis(np.tensordot(values, self.coeffs, axes=([1], [0])), -1, 1)

    def gradient(self) -> Field:
        if self._gradient is None:
            self._gradient = LinearCombinationBasis(self.coeffs, self.basis.gradient())
        return self._gradient


class _FieldListBasis(FieldBasis):
    def __init__(self, fields: Sequence[Field]):
        self.fields = [as_field(f) for f in fields]
        self.num_basis = len(self.fields)
        self.memoize = False

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        return np.stack([f._evaluate(cache, xs) for f in self.fields], axis=1)

    def gradient(self) -> Field:
        return _FieldListBasis([f.gradient() for f in self.fields])


class LinearCombinationField(Field):
    """``x -> sum_b coeffs[b] * basis[b](x)``; coefficients may carry a value shape."""

    name = "linear_combination"

    def __init__(self, coeffs: Any, basis: FieldBasis):
        self.coeffs = np.array(coeffs, dtype=float)
        if self.coeffs.ndim == 0 or self.coeffs.shape[0] != basis.num_basis:
            raise ShapeError(f"{self.coeffs.shape[:1]} coefficients for {basis.num_basis} basis fields")
        self.basis = basis

    def _eval(self, cache: EvalCache | None, xs: np.ndarray) -> np.ndarray:
        return np.tensordot(self.basis._evaluate(cache, xs), self.coeffs, axes=([1], [0]))

    def gradient(self) -> Field:
        grad = self.basis.gradient()
        if self.basis.is_affine:
            values = grad._evaluate(None, np.zeros((1, self.basis.dim)))
            return ConstantField(np.tensordot(values, self.coeffs, axes=([1], [0]))[0])
        return LinearCombinationField(self.coeffs, grad)


def linear_combination(coeffs: Any, fields: Any) -> Field:
    """Vector coefficients give one field; a matrix gives one field per column."""
    basis = fields if isinstance(fields, FieldBasis) else _FieldListBasis(fields)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[:1] != (basis.num_basis,):
        raise ShapeError(f"{coeffs.shape[:1]} coefficients for {basis.num_basis} fields")
    if coeffs.ndim == 2:
        return LinearCombinationBasis(coeffs, basis)
    if coeffs.ndim == 1:
        return LinearCombinationField(coeffs, basis)
    raise ShapeError("linear_combination takes a coefficient vector or matrix")


def evaluate_field(f: Field, x: Any, cache: EvalCache | None = None) -> np.ndarray:
    return f.evaluate(cache, x)


def operate_fields(op: Callable, *args: Any) -> Field:
    return OperationField(op, [as_field(a) for a in args])


def compose(f: Any, h: Any) -> Field:
    return ComposedField(as_field(f), as_field(h))


def gradient(f: Any) -> Any:
    if isinstance(f, Field) or hasattr(f, "gradient"):
        return f.gradient()
    return as_field(f).gradient()


def divergence(f: Any) -> Any:
    return tensors.tr(gradient(f))
