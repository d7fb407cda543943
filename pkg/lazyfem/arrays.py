from __future__ import annotations

import operator
from collections.abc import Sequence
from typing import Any

import numpy as np

from .blocks import ArrayBlock
from .errors import LengthMismatchError


def _check_index(i: Any, length: int) -> int:
    try:
        index = operator.index(i)
    except TypeError as exc:
        raise TypeError(f"cell array indices must be integers, not {type(i).__name__}") from exc
    if index < 0 or index >= length:
        raise IndexError(f"index {index} out of range for cell array of length {length}")
    return index


def return_cache(f: Any, *args: Any) -> Any:
    """Cache of a mapping for the given arguments; plain callables have none."""
    method = None if isinstance(f, type) else getattr(f, "return_cache", None)
    if method is None:
        return None
    return method(*args)


def evaluate(f: Any, cache: Any, *args: Any) -> Any:
    method = None if isinstance(f, type) else getattr(f, "evaluate", None)
    if method is None:
        return f(*args)
    return method(cache, *args)


class CellArray:
    """Read-only random access array of cell data with the cache protocol."""

    def __len__(self) -> int:
        raise NotImplementedError

    def _get(self, i: int) -> Any:
        raise NotImplementedError

    def __getitem__(self, i: Any) -> Any:
        return self._get(_check_index(i, len(self)))

    def __iter__(self):
        cache = self.make_cache()
        for i in range(len(self)):
            yield self.get_with_cache(cache, i)

    def make_cache(self) -> Any:
        return None

    def get_with_cache(self, cache: Any, i: Any) -> Any:
        return self[i]

    def describe(self) -> str:
        return f"{type(self).__name__}(len={len(self)})"


class FillArray(CellArray):
    def __init__(self, value: Any, length: int):
        if length < 0:
            raise ValueError("FillArray length must be non-negative")
        self.value = value
        self.length = int(length)

    def __len__(self) -> int:
        return self.length

    def _get(self, i: int) -> Any:
        return self.value

    def describe(self) -> str:
        return f"FillArray{{{_element_name(self.value)}}}(len={self.length})"


class CompressedArray(CellArray):
    def __init__(self, values: Sequence[Any], index_map: Any):
        self.values = list(values)
        self.index_map = np.asarray(index_map, dtype=np.int64)
        if self.index_map.ndim != 1:
            raise ValueError("CompressedArray index_map must be one-dimensional")
        if self.index_map.size and (self.index_map.min() < 0 or self.index_map.max() >= len(self.values)):
            raise IndexError("CompressedArray index_map entry outside of the values list")

    def __len__(self) -> int:
        return len(self.index_map)

    def _get(self, i: int) -> Any:
        return self.values[self.index_map[i]]

    def describe(self) -> str:
        kinds = ",".join(sorted({_element_name(v) for v in self.values}))
        return f"CompressedArray{{{kinds}}}(len={len(self)}, values={len(self.values)})"


class JaggedTable(CellArray):
    """Rows stored back to back in ``data`` and delimited by ``ptrs``."""

    def __init__(self, data: Any, ptrs: Any):
        self.data = np.asarray(data)
        self.ptrs = np.asarray(ptrs, dtype=np.int64)
        if self.ptrs.ndim != 1 or len(self.ptrs) == 0:
            raise ValueError("JaggedTable ptrs must be a non-empty vector")
        if self.ptrs[0] != 0 or self.ptrs[-1] != len(self.data):
            raise ValueError("JaggedTable ptrs must start at 0 and end at len(data)")
        if np.any(np.diff(self.ptrs) < 0):
            raise ValueError("JaggedTable ptrs must be non-decreasing")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Any]], dtype: Any = None) -> "JaggedTable":
        lengths = [len(row) for row in rows]
        ptrs = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(lengths, out=ptrs[1:])
        if ptrs[-1] == 0:
            data = np.zeros(0, dtype=dtype or np.int64)
        else:
            data = np.concatenate([np.asarray(row, dtype=dtype) for row in rows if len(row)])
        return cls(data, ptrs)

    @classmethod
    def from_dense(cls, array: Any) -> "JaggedTable":
        array = np.asarray(array)
        nrows, width = array.shape
        return cls(array.reshape(-1), np.arange(nrows + 1, dtype=np.int64) * width)

    def __len__(self) -> int:
        return len(self.ptrs) - 1

    def _get(self, i: int) -> np.ndarray:
        return self.data[self.ptrs[i]:self.ptrs[i + 1]]

    @property
    def row_lengths(self) -> np.ndarray:
        return np.diff(self.ptrs)

    def is_uniform(self) -> bool:
        lengths = self.row_lengths
        return len(lengths) == 0 or bool(np.all(lengths == lengths[0]))

    def to_dense(self) -> np.ndarray:
        if not self.is_uniform():
            raise ValueError("only tables with equal row lengths have a dense form")
        width = int(self.row_lengths[0]) if len(self) else 0
        return self.data.reshape(len(self), width)

    def describe(self) -> str:
        return f"JaggedTable{{{self.data.dtype}}}(len={len(self)})"


class CachedBuffer:
    """Resizable buffer that keeps one allocation per requested shape."""

    def __init__(self, dtype: Any = float):
        self.dtype = np.dtype(dtype)
        self.current: np.ndarray | None = None
        self.allocations = 0
        self._pool: dict[tuple, np.ndarray] = {}

    def resize(self, shape: Sequence[int], dtype: Any = None) -> np.ndarray:
        shape = tuple(int(s) for s in shape)
        if any(s < 0 for s in shape):
            raise ValueError("buffer dimensions must be non-negative")
        kind = self.dtype if dtype is None else np.dtype(dtype)
        key = (shape, kind.str if kind != object else "O")
        buffer = self._pool.get(key)
        if buffer is None:
            buffer = np.empty(shape, dtype=kind)
            self._pool[key] = buffer
            self.allocations += 1
        self.current = buffer
        return buffer


class _LazyCache:
    __slots__ = ("op_cache", "input_caches")

    def __init__(self, op_cache: Any, input_caches: tuple):
        self.op_cache = op_cache
        self.input_caches = input_caches


class LazyMapped(CellArray):
    """Entry ``i`` is ``op(inputs[0][i], ..., inputs[-1][i])``, computed on access."""

    def __init__(self, op: Any, *inputs: Any):
        self.op = op
        self.inputs = inputs
        self.length = _common_length(inputs)

    def __len__(self) -> int:
        return self.length

    def make_cache(self) -> _LazyCache:
        input_caches = tuple(make_cache(a) for a in self.inputs)
        op_cache = None
        if self.length:
            first = [get_with_cache(c, a, 0) for c, a in zip(input_caches, self.inputs)]
            op_cache = return_cache(self.op, *first)
        return _LazyCache(op_cache, input_caches)

    def get_with_cache(self, cache: _LazyCache, i: Any) -> Any:
        index = _check_index(i, self.length)
        args = [get_with_cache(c, a, index) for c, a in zip(cache.input_caches, self.inputs)]
        return evaluate(self.op, cache.op_cache, *args)

    def _get(self, i: int) -> Any:
        return self.get_with_cache(self.make_cache(), i)

    def describe(self) -> str:
        return f"LazyMapped({op_name(self.op)})(len={self.length})"


def make_cache(arr: Any) -> Any:
    if isinstance(arr, CellArray):
        return arr.make_cache()
    return None


def get_with_cache(cache: Any, arr: Any, i: Any) -> Any:
    if isinstance(arr, CellArray):
        return arr.get_with_cache(cache, i)
    return arr[i]


def collect(arr: Any) -> list:
    """Every entry, evaluated with one cache; entries held in reused buffers are copied."""
    cache = make_cache(arr)
    return [_snapshot(get_with_cache(cache, arr, i)) for i in range(len(arr))]


def _snapshot(value: Any) -> Any:
    if isinstance(value, (np.ndarray, ArrayBlock)):
        return value.copy()
    return value


def count_allocations(cache: Any) -> int:
    """Total CachedBuffer allocations reachable from a cache object."""
    if isinstance(cache, CachedBuffer):
        return cache.allocations
    if isinstance(cache, _LazyCache):
        return count_allocations(cache.op_cache) + sum(count_allocations(c) for c in cache.input_caches)
    if isinstance(cache, (tuple, list)):
        return sum(count_allocations(c) for c in cache)
    buffers = getattr(cache, "buffers", None)
    if buffers is not None:
        return sum(count_allocations(b) for b in buffers())
    return 0


def make_fill(value: Any, length: int) -> FillArray:
    return FillArray(value, length)


def _common_length(inputs: Sequence[Any]) -> int:
    if not inputs:
        raise ValueError("lazy_map needs at least one input array")
    lengths = {len(a) for a in inputs}
    if len(lengths) != 1:
        raise LengthMismatchError(f"lazy_map inputs have different lengths: {sorted(lengths)}")
    return lengths.pop()


def lazy_map(op: Any, *inputs: Any) -> CellArray:
    length = _common_length(inputs)
    fold = getattr(op, "lazy_fold", None)
    if fold is not None:
        folded = fold(*inputs)
        if folded is not None:
            return folded
    if all(isinstance(a, FillArray) for a in inputs):
        values = [a.value for a in inputs]
        return FillArray(evaluate(op, return_cache(op, *values), *values), length)
    compressed = [a for a in inputs if isinstance(a, CompressedArray)]
    if (
        compressed
        and all(isinstance(a, (FillArray, CompressedArray)) for a in inputs)
        and all(c.index_map is compressed[0].index_map for c in compressed)
    ):
        values = []
        for j in range(len(compressed[0].values)):
            args = [a.value if isinstance(a, FillArray) else a.values[j] for a in inputs]
            values.append(evaluate(op, return_cache(op, *args), *args))
        return CompressedArray(values, compressed[0].index_map)
    return LazyMapped(op, *inputs)


def op_name(op: Any) -> str:
    name = getattr(op, "name", None)
    if isinstance(name, str):
        return name
    name = getattr(op, "__name__", None)
    if isinstance(name, str):
        return name
    return type(op).__name__


def _element_name(value: Any) -> str:
    if isinstance(value, np.ndarray):
        return f"ndarray[{value.dtype}]{value.shape}"
    return type(value).__name__


def _leaf_line(arr: Any) -> str:
    if isinstance(arr, CellArray):
        return arr.describe()
    if isinstance(arr, np.ndarray):
        return f"ndarray{{{arr.dtype}}}(len={len(arr)})"
    first = _element_name(arr[0]) if len(arr) else "empty"
    return f"{type(arr).__name__}{{{first}}}(len={len(arr)})"


def print_op_tree(arr: Any, indent: str = "  ") -> str:
    lines: list[str] = []

    def walk(node: Any, depth: int) -> None:
        if isinstance(node, LazyMapped):
            lines.append(f"{indent * depth}{op_name(node.op)}")
            for child in node.inputs:
                walk(child, depth + 1)
        else:
            lines.append(f"{indent * depth}{_leaf_line(node)}")

    walk(arr, 0)
    return "\n".join(lines)
