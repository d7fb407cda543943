"""Block arrays with a touched mask: untouched blocks are structural zeros and never read."""
from __future__ import annotations

import operator
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .errors import BlockStructureError


def _position(pos: Any, shape: tuple) -> tuple:
    pos = (pos,) if np.isscalar(pos) else tuple(pos)
    if len(pos) != len(shape) or any(not 0 <= p < s for p, s in zip(pos, shape)):
        raise BlockStructureError(f"block position {pos} outside of block shape {shape}")
    return tuple(int(p) for p in pos)


class ArrayBlock:
    """One- or two-dimensional grid of array entries (or nested ArrayBlocks)."""

    def __init__(self, array: np.ndarray, touched: np.ndarray):
        if array.shape != touched.shape or array.ndim not in (1, 2):
            raise BlockStructureError("block entries and mask must share a 1D or 2D shape")
        self.array = array
        self.touched = touched.astype(bool)

    @property
    def shape(self) -> tuple:
        return self.array.shape

    @property
    def ndim(self) -> int:
        return self.array.ndim

    def touched_positions(self) -> list[tuple]:
        return [tuple(int(i) for i in p) for p in np.argwhere(self.touched)]

    def is_touched(self, pos: Any) -> bool:
        return bool(self.touched[_position(pos, self.shape)])

    def __getitem__(self, pos: Any) -> Any:
        pos = _position(pos, self.shape)
        if not self.touched[pos]:
            raise BlockStructureError(f"block {pos} is not touched")
        return self.array[pos]

    def copy(self) -> "ArrayBlock":
        array = np.empty(self.shape, dtype=object)
        for pos in self.touched_positions():
            array[pos] = _copy_entry(self.array[pos])
        return ArrayBlock(array, self.touched.copy())

    def __add__(self, other: Any) -> "ArrayBlock":
        return block_binary(operator.add, self, other)

    def __sub__(self, other: Any) -> "ArrayBlock":
        return block_binary(operator.sub, self, other)

    def __neg__(self) -> "ArrayBlock":
        return block_map(operator.neg, self)

    def __mul__(self, scalar: Any) -> "ArrayBlock":
        if not np.isscalar(scalar):
            return NotImplemented
        return block_map(lambda x: x * scalar, self)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return block_display(self)


def _copy_entry(x: Any) -> Any:
    return x.copy() if hasattr(x, "copy") else x


def block_make(shape: Any, entries: Iterable[tuple[Any, Any]] | dict = ()) -> ArrayBlock:
    shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
    if len(shape) not in (1, 2) or any(s < 0 for s in shape):
        raise BlockStructureError(f"invalid block shape {shape}")
    array = np.empty(shape, dtype=object)
    touched = np.zeros(shape, dtype=bool)
    items = entries.items() if isinstance(entries, dict) else entries
    for pos, value in items:
        pos = _position(pos, shape)
        if touched[pos]:
            raise BlockStructureError(f"block {pos} given twice")
        array[pos] = value
        touched[pos] = True
    return ArrayBlock(array, touched)


def block_map(op: Callable, a: ArrayBlock) -> ArrayBlock:
    array = np.empty(a.shape, dtype=object)
    for pos in a.touched_positions():
        x = a.array[pos]
        array[pos] = block_map(op, x) if isinstance(x, ArrayBlock) else op(x)
    return ArrayBlock(array, a.touched.copy())


def block_binary(op: Callable, a: ArrayBlock, b: ArrayBlock) -> ArrayBlock:
    """Entry-wise ``a + b`` or ``a - b``; the touched mask is the union of both masks."""
    if op not in (operator.add, operator.sub):
        raise BlockStructureError("block_binary supports addition and subtraction only")
    if not isinstance(a, ArrayBlock) or not isinstance(b, ArrayBlock):
        raise BlockStructureError("block_binary needs two ArrayBlocks")
    if a.shape != b.shape:
        raise BlockStructureError(f"block shapes {a.shape} and {b.shape} differ")
    array = np.empty(a.shape, dtype=object)
    touched = a.touched | b.touched
    for pos in (tuple(int(i) for i in p) for p in np.argwhere(touched)):
        in_a, in_b = a.touched[pos], b.touched[pos]
        if in_a and in_b:
            x, y = a.array[pos], b.array[pos]
            array[pos] = block_binary(op, x, y) if isinstance(x, ArrayBlock) else op(x, y)
        elif in_a:
            array[pos] = _copy_entry(a.array[pos])
        else:
            y = b.array[pos]
            if op is operator.sub:
                array[pos] = block_map(operator.neg, y) if isinstance(y, ArrayBlock) else -y
            else:
                array[pos] = _copy_entry(y)
    return ArrayBlock(array, touched)


def block_matmul(a: ArrayBlock, b: ArrayBlock) -> ArrayBlock:
    """Block matrix times block vector; block I is touched if any A_IJ and b_J both are."""
    if a.ndim != 2 or b.ndim != 1 or a.shape[1] != b.shape[0]:
        raise BlockStructureError(f"cannot multiply blocks of shapes {a.shape} and {b.shape}")
    array = np.empty(a.shape[0], dtype=object)
    touched = np.zeros(a.shape[0], dtype=bool)
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if not (a.touched[i, j] and b.touched[j]):
                continue
            x, y = a.array[i, j], b.array[j]
            term = block_matmul(x, y) if isinstance(x, ArrayBlock) else x @ y
            array[i] = term if not touched[i] else (
                block_binary(operator.add, array[i], term) if isinstance(term, ArrayBlock) else array[i] + term
            )
            touched[i] = True
    return ArrayBlock(array, touched)


def _total(size: Any) -> int:
    if isinstance(size, (list, tuple)):
        return sum(_total(s) for s in size)
    return int(size)


def materialize(a: Any, row_sizes: Sequence[Any], col_sizes: Sequence[Any] | None = None) -> np.ndarray:
    """Dense array with zeros in untouched blocks."""
    if not isinstance(a, ArrayBlock):
        return np.asarray(a, dtype=float)
    if a.ndim == 1:
        out = np.zeros(_total(row_sizes))
        start = 0
        for i, size in enumerate(row_sizes):
            stop = start + _total(size)
            if a.touched[i]:
                sub = size if isinstance(size, (list, tuple)) else [size]
                entry = a.array[i]
                out[start:stop] = materialize(entry, sub) if isinstance(entry, ArrayBlock) else entry
            start = stop
        return out
    if col_sizes is None:
        raise BlockStructureError("column sizes are needed to materialize a block matrix")
    out = np.zeros((_total(row_sizes), _total(col_sizes)))
    r0 = 0
    for i, rs in enumerate(row_sizes):
        r1 = r0 + _total(rs)
        c0 = 0
        for j, cs in enumerate(col_sizes):
            c1 = c0 + _total(cs)
            if a.touched[i, j]:
                entry = a.array[i, j]
                if isinstance(entry, ArrayBlock):
                    entry = materialize(entry, rs if isinstance(rs, (list, tuple)) else [rs],
                                        cs if isinstance(cs, (list, tuple)) else [cs])
                out[r0:r1, c0:c1] = entry
            c0 = c1
        r0 = r1
    return out


def _describe_entry(x: Any) -> str:
    x = np.asarray(x)
    if x.ndim == 0:
        return "scalar"
    if x.ndim == 1:
        return f"vector({x.shape[0]})"
    if x.ndim == 2:
        return f"matrix({x.shape[0]}x{x.shape[1]})"
    return f"array{x.shape}"


def block_display(a: ArrayBlock, indent: str = "  ") -> str:
    lines: list[str] = []

    def walk(block: ArrayBlock, depth: int) -> None:
        pad = indent * depth
        if block.ndim == 1:
            lines.append(f"{pad}VectorBlock({block.shape[0]})")
        else:
            lines.append(f"{pad}MatrixBlock({block.shape[0]}x{block.shape[1]})")
        for pos in np.ndindex(block.shape):
            label = ",".join(str(p) for p in pos)
            if not block.touched[pos]:
                lines.append(f"{pad}{indent}[{label}] empty")
                continue
            entry = block.array[pos]
            if isinstance(entry, ArrayBlock):
                lines.append(f"{pad}{indent}[{label}]")
                walk(entry, depth + 2)
            else:
                lines.append(f"{pad}{indent}[{label}] {_describe_entry(entry)}")

    walk(a, 0)
    return "\n".join(lines)
