"""Small first and second order tensors stored as numpy arrays.

Every kernel accepts ``nbatch``: the number of leading axes that index
points or basis functions. The remaining trailing axes hold the value, so
the same closed-form expressions serve a single value and a whole batch.
Fields and cell fields intercept these functions through ``__operate__``.
"""
from __future__ import annotations

import functools
from typing import Any, Callable

import numpy as np

from .errors import ShapeError, SingularJacobianError

SINGULAR_TOL = 1e-14


def _handler(args: tuple) -> Any:
    best = None
    for arg in args:
        handler = getattr(type(arg), "__operate__", None)
        if handler is None:
            continue
        if best is None or type(arg).__operate_priority__ > type(best).__operate_priority__:
            best = arg
    return best


def operation(kernel: Callable) -> Callable:
    """Makes ``kernel`` dispatch to fields when any operand is a field."""

    @functools.wraps(kernel)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        owner = _handler(args)
        if owner is not None:
            return type(owner).__operate__(wrapper, *args)
        return kernel(*args, **kwargs)

    wrapper.kernel = kernel
    return wrapper


def VectorValue(*components: Any) -> np.ndarray:
    if len(components) == 1 and np.ndim(components[0]) == 1:
        components = tuple(components[0])
    value = np.array(components, dtype=float)
    if value.ndim != 1 or not 1 <= len(value) <= 3:
        raise ShapeError("VectorValue takes between 1 and 3 components")
    return value


Point = VectorValue


def TensorValue(*rows: Any) -> np.ndarray:
    if len(rows) == 1 and np.ndim(rows[0]) == 2:
        rows = tuple(rows[0])
    value = np.array(rows, dtype=float)
    if value.ndim != 2 or not (1 <= value.shape[0] <= 3 and 1 <= value.shape[1] <= 3):
        raise ShapeError("TensorValue takes a D1 x D2 nested sequence with D1, D2 <= 3")
    return value


def _ranks(nbatch: int, *values: np.ndarray) -> tuple[int, ...]:
    return tuple(v.ndim - nbatch for v in values)


def _as_arrays(*values: Any) -> tuple[np.ndarray, ...]:
    return tuple(np.asarray(v, dtype=float) if not isinstance(v, np.ndarray) else v for v in values)


def _einsum(subscripts: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.einsum(subscripts, a, b)
    except ValueError as exc:
        raise ShapeError(f"incompatible value shapes {a.shape} and {b.shape}") from exc


def _scale(scalar: np.ndarray, value: np.ndarray, rank: int) -> np.ndarray:
    return scalar.reshape(scalar.shape + (1,) * rank) * value


@operation
def add(a: Any, b: Any, nbatch: int = 0) -> np.ndarray:
    a, b = _as_arrays(a, b)
    ra, rb = _ranks(nbatch, a, b)
    if ra != rb:
        raise ShapeError(f"cannot add values of rank {ra} and {rb}")
    try:
        return a + b
    except ValueError as exc:
        raise ShapeError(f"cannot add shapes {a.shape} and {b.shape}") from exc


@operation
def sub(a: Any, b: Any, nbatch: int = 0) -> np.ndarray:
    a, b = _as_arrays(a, b)
    ra, rb = _ranks(nbatch, a, b)
    if ra != rb:
        raise ShapeError(f"cannot subtract values of rank {ra} and {rb}")
    try:
        return a - b
    except ValueError as exc:
        raise ShapeError(f"cannot subtract shapes {a.shape} and {b.shape}") from exc


@operation
def neg(a: Any, nbatch: int = 0) -> np.ndarray:
    return -np.asarray(a, dtype=float)


@operation
def mul(a: Any, b: Any, nbatch: int = 0) -> np.ndarray:
    """Scaling when one factor is a scalar, single contraction otherwise."""
    a, b = _as_arrays(a, b)
    ra, rb = _ranks(nbatch, a, b)
    if ra == 0:
        return _scale(a, b, rb)
    if rb == 0:
        return _scale(b, a, ra)
    return dot.kernel(a, b, nbatch=nbatch)


@operation
def div(a: Any, b: Any, nbatch: int = 0) -> np.ndarray:
    a, b = _as_arrays(a, b)
    ra, rb = _ranks(nbatch, a, b)
    if rb != 0:
        raise ShapeError("only division by scalars is defined")
    return a / b.reshape(b.shape + (1,) * ra)


_DOT = {
    (1, 1): "...i,...i->...",
    (2, 1): "...ij,...j->...i",
    (1, 2): "...i,...ij->...j",
    (2, 2): "...ij,...jk->...ik",
}


@operation
def dot(a: Any, b: Any, nbatch: int = 0) -> np.ndarray:
    a, b = _as_arrays(a, b)
    ranks = _ranks(nbatch, a, b)
    if ranks not in _DOT:
        raise ShapeError(f"dot is not defined for ranks {ranks}")
    return _einsum(_DOT[ranks], a, b)


@operation
def inner(a: Any, b: Any, nbatch: int = 0) -> np.ndarray:
    a, b = _as_arrays(a, b)
    ranks = _ranks(nbatch, a, b)
    if ranks == (0, 0):
        return a * b
    if ranks == (1, 1):
        return _einsum("...i,...i->...", a, b)
    if ranks == (2, 2):
        return _einsum("...ij,...ij->...", a, b)
    raise ShapeError(f"inner is not defined for ranks {ranks}")


@operation
def outer(a: Any, b: Any, nbatch: int = 0) -> np.ndarray:
    a, b = _as_arrays(a, b)
    ranks = _ranks(nbatch, a, b)
    if ranks == (1, 1):
        return _einsum("...i,...j->...ij", a, b)
    if ranks[0] == 0:
        return _scale(a, b, ranks[1])
    if ranks[1] == 0:
        return _scale(b, a, ranks[0])
    raise ShapeError(f"outer is not defined for ranks {ranks}")


def _square(a: np.ndarray, nbatch: int) -> int:
    if a.ndim - nbatch != 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"expected square second-order tensors, got value shape {a.shape[nbatch:]}")
    size = a.shape[-1]
    if size > 3:
        raise ShapeError("closed-form tensor algebra is limited to D <= 3")
    return size


@operation
def transpose(a: Any, nbatch: int = 0) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim - nbatch != 2:
        raise ShapeError("transpose needs a second-order tensor")
    return np.swapaxes(a, -1, -2)


@operation
def tr(a: Any, nbatch: int = 0) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    _square(a, nbatch)
    return np.trace(a, axis1=-2, axis2=-1)


@operation
def det(a: Any, nbatch: int = 0) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    size = _square(a, nbatch)
    if size == 1:
        return a[..., 0, 0].copy()
    if size == 2:
        return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    return (
        a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
        - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
        + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
    )


@operation
def inv(a: Any, nbatch: int = 0) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    size = _square(a, nbatch)
    d = det.kernel(a, nbatch=nbatch)
    scale = np.abs(a).max(axis=(-2, -1))
    if np.any(np.abs(d) <= SINGULAR_TOL * scale):
        raise SingularJacobianError("singular matrix: |det| below the relative tolerance")
    if size == 1:
        return 1.0 / a
    if size == 2:
        cof = np.stack(
            [np.stack([a[..., 1, 1], -a[..., 0, 1]], axis=-1),
             np.stack([-a[..., 1, 0], a[..., 0, 0]], axis=-1)],
            axis=-2,
        )
        return cof / d[..., None, None]
    c00 = a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1]
    c01 = a[..., 0, 2] * a[..., 2, 1] - a[..., 0, 1] * a[..., 2, 2]
    c02 = a[..., 0, 1] * a[..., 1, 2] - a[..., 0, 2] * a[..., 1, 1]
    c10 = a[..., 1, 2] * a[..., 2, 0] - a[..., 1, 0] * a[..., 2, 2]
    c11 = a[..., 0, 0] * a[..., 2, 2] - a[..., 0, 2] * a[..., 2, 0]
    c12 = a[..., 0, 2] * a[..., 1, 0] - a[..., 0, 0] * a[..., 1, 2]
    c20 = a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0]
    c21 = a[..., 0, 1] * a[..., 2, 0] - a[..., 0, 0] * a[..., 2, 1]
    c22 = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    adj = np.stack(
        [np.stack([c00, c01, c02], axis=-1),
         np.stack([c10, c11, c12], axis=-1),
         np.stack([c20, c21, c22], axis=-1)],
        axis=-2,
    )
    return adj / d[..., None, None]


@operation
def norm(a: Any, nbatch: int = 0) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    rank = a.ndim - nbatch
    if rank == 0:
        return np.abs(a)
    return np.sqrt(np.sum(a * a, axis=tuple(range(-rank, 0))))
