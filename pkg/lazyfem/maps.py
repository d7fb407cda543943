from __future__ import annotations

from typing import Any

import numpy as np

from .arrays import CachedBuffer, CellArray, CompressedArray, FillArray, get_with_cache, make_cache, op_name
from .errors import ShapeError


class Map:
    """Callable that can pre-compute a cache and reuse it between evaluations."""

    def return_cache(self, *args: Any) -> Any:
        return None

    def evaluate(self, cache: Any, *args: Any) -> Any:
        raise NotImplementedError

    def __call__(self, *args: Any) -> Any:
        return self.evaluate(self.return_cache(*args), *args)


class Broadcasting(Map):
    """Applies an elemental operation entry-wise with expansion of singleton axes."""

    def __init__(self, op: Any):
        self.op = op
        self.name = f"Broadcasting({op_name(op)})"

    def return_cache(self, *args: Any) -> CachedBuffer:
        return CachedBuffer()

    def evaluate(self, cache: CachedBuffer | None, *args: Any) -> np.ndarray:
        if cache is None:
            cache = CachedBuffer()
        if isinstance(self.op, Reindex) and len(args) == 1:
            return self.op.take(cache, np.asarray(args[0]))
        arrays = [np.asarray(a) if not isinstance(a, np.ndarray) else a for a in args]
        try:
            shape = np.broadcast_shapes(*(a.shape for a in arrays))
        except ValueError as exc:
            raise ShapeError(f"cannot broadcast shapes {[a.shape for a in arrays]}") from exc
        if isinstance(self.op, np.ufunc) and all(a.dtype != object for a in arrays):
            out = cache.resize(shape, np.result_type(*arrays, 1.0))
            return self.op(*arrays, out=out)
        return self._generic(cache, shape, arrays)

    def _generic(self, cache: CachedBuffer, shape: tuple, arrays: list) -> np.ndarray:
        items = np.broadcast(*arrays)
        results = [self.op(*entry) for entry in items]
        numeric = (np.ndarray, np.generic, float, int)
        if results and all(isinstance(r, numeric) and np.asarray(r).dtype != object for r in results):
            first = np.asarray(results[0])
            out = cache.resize(shape + first.shape, np.result_type(first, 1.0))
            flat = out.reshape((-1,) + first.shape)
            for k, r in enumerate(results):
                flat[k] = r
            return out
        out = cache.resize(shape, object)
        flat = out.reshape(-1)
        for k, r in enumerate(results):
            flat[k] = r
        return out


class Reindex(Map):
    """Turns an array into a callable: ``Reindex(values)(i) == values[i]``."""

    name = "Reindex"

    def __init__(self, values: Any):
        self.values = values

    def return_cache(self, *args: Any) -> Any:
        return make_cache(self.values)

    def evaluate(self, cache: Any, i: Any) -> Any:
        return get_with_cache(cache, self.values, i)

    def take(self, cache: CachedBuffer, indices: np.ndarray) -> np.ndarray:
        values = np.asarray(self.values)
        out = cache.resize(indices.shape + values.shape[1:], values.dtype)
        return np.take(values, indices, axis=0, out=out)

    def lazy_fold(self, indices: Any) -> CellArray | None:
        if isinstance(self.values, FillArray):
            return FillArray(self.values.value, len(indices))
        if isinstance(self.values, CompressedArray) and isinstance(indices, np.ndarray):
            return CompressedArray(self.values.values, self.values.index_map[indices])
        return None
