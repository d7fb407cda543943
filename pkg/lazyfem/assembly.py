"""Sparse assembly of cell contributions into CSR matrices and dense vectors.

Assembly runs in two passes. ``allocate_pattern`` freezes the sparsity pattern
and, for every cell entry, the slot of the CSR value array it lands in (slot
``nnz`` collects entries with a constrained row or column). Value passes then
gather the cell arrays and accumulate them with one ``np.bincount`` per block
in cell order and local row-major order, so fresh assembly and in-place
reassembly produce the same sums.
"""
from __future__ import annotations

import logging
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import scipy.sparse as sp

from .arrays import JaggedTable, get_with_cache, make_cache
from .blocks import ArrayBlock
from .celldata import DomainContribution
from .errors import AssemblyError
from .fespaces import FESpace, MultiFieldFESpace

logger = logging.getLogger(__name__)

CHUNK_SIZE = 1024


def _id_table(ids: Any) -> np.ndarray:
    if isinstance(ids, JaggedTable):
        if not ids.is_uniform():
            raise AssemblyError("cell DOF tables with rows of different lengths cannot be assembled together")
        return ids.to_dense().astype(np.int64, copy=False)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 2:
        raise AssemblyError("cell DOF ids must form a (ncells, ndofs) table")
    return ids


def _check_range(ids: np.ndarray, size: int, label: str) -> None:
    if ids.size and ids.max() >= size:
        raise AssemblyError(f"{label} id {int(ids.max())} out of range for {size} free DOFs")


@dataclass
class PlanBlock:
    """Cells of one triangulation contributing to one (row field, column field) block."""

    tri: Any
    row_block: int | None
    col_block: int | None
    rows: np.ndarray
    cols: np.ndarray
    slots: np.ndarray | None = None

    @property
    def selector(self) -> tuple | None:
        return None if self.row_block is None else (self.row_block, self.col_block)

    @property
    def local_shape(self) -> tuple[int, int]:
        return self.rows.shape[1], self.cols.shape[1]


class AssemblyPlan:
    """Frozen CSR pattern plus the per-cell slots of every contributing block."""

    def __init__(self, nrows: int, ncols: int, blocks: list[PlanBlock]):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.blocks = blocks
        self._rows: list[tuple[Any, int | None, np.ndarray]] = []
        self._matrices: dict[int, weakref.ref] = {}
        self._build()
        for b in blocks:
            if self.vector_rows(b.tri, b.row_block) is None:
                self.add_rows(b.tri, b.row_block, b.rows)

    def _build(self) -> None:
        stride = max(self.ncols, 1)
        keys_per_block = []
        for b in self.blocks:
            if len(b.rows) != len(b.cols):
                raise AssemblyError(f"{len(b.rows)} row tables for {len(b.cols)} column tables")
            _check_range(b.rows, self.nrows, "row")
            _check_range(b.cols, self.ncols, "column")
            free = (b.rows[:, :, None] >= 0) & (b.cols[:, None, :] >= 0)
            keys = np.where(free, b.rows[:, :, None] * stride + b.cols[:, None, :], -1)
            keys_per_block.append(keys.reshape(len(b.rows), -1))
        valid = [k[k >= 0] for k in keys_per_block]
        pattern = np.unique(np.concatenate(valid)) if valid else np.zeros(0, dtype=np.int64)
        self.nnz = len(pattern)
        index_type = np.int32 if max(self.nnz, self.nrows, self.ncols) < np.iinfo(np.int32).max else np.int64
        self.indices = (pattern % stride).astype(index_type)
        self.indptr = np.zeros(self.nrows + 1, dtype=index_type)
        np.cumsum(np.bincount(pattern // stride, minlength=self.nrows), out=self.indptr[1:])
        for b, keys in zip(self.blocks, keys_per_block):
            b.slots = np.where(keys >= 0, np.searchsorted(pattern, keys), self.nnz).astype(index_type)
        logger.debug("pattern %dx%d with %d nonzeros from %d blocks", self.nrows, self.ncols, self.nnz, len(self.blocks))

    def add_rows(self, tri: Any, row_block: int | None, rows: np.ndarray) -> None:
        rows = _id_table(rows)
        _check_range(rows, self.nrows, "row")
        self._rows.append((tri, row_block, rows))

    def vector_rows(self, tri: Any, row_block: int | None) -> np.ndarray | None:
        for t, block, rows in self._rows:
            if t is tri and block == row_block:
                return rows
        return None

    def row_entries(self, tri: Any) -> list[tuple[int | None, np.ndarray]]:
        return [(block, rows) for t, block, rows in self._rows if t is tri]

    def blocks_on(self, tri: Any) -> list[PlanBlock]:
        return [b for b in self.blocks if b.tri is tri]

    def new_matrix(self, data: np.ndarray) -> sp.csr_matrix:
        matrix = sp.csr_matrix((data, self.indices, self.indptr), shape=(self.nrows, self.ncols))
        self._matrices[id(matrix)] = weakref.ref(matrix)
        return matrix

    def owns(self, matrix: Any) -> bool:
        ref = self._matrices.get(id(matrix))
        return ref is not None and ref() is matrix and matrix.nnz == self.nnz

    def __repr__(self) -> str:
        return f"AssemblyPlan({self.nrows}x{self.ncols}, nnz={self.nnz})"


def allocate_pattern(rows: Any, cols: Any, nrows: int, ncols: int) -> AssemblyPlan:
    """Pattern of the free x free pairs of two signed cell DOF tables.

    Plans built this way take plain cell arrays (lists or lazy arrays of local
    matrices and vectors) rather than domain contributions.
    """
    return AssemblyPlan(nrows, ncols, [PlanBlock(None, None, None, _id_table(rows), _id_table(cols))])


def _sources(values: Any) -> list[tuple[Any, Any]]:
    if isinstance(values, DomainContribution):
        return values.items()
    return [(None, values)]


def _entry(value: Any, selector: tuple | None, shape: tuple, cell: int) -> np.ndarray | None:
    if selector is None:
        if isinstance(value, ArrayBlock):
            raise AssemblyError(f"cell {cell}: block value where a plain array was expected")
        entry = value
    else:
        if not isinstance(value, ArrayBlock):
            raise AssemblyError(f"cell {cell}: plain array where a block value was expected")
        if not value.is_touched(selector):
            return None
        entry = value.array[selector]
    entry = np.asarray(entry)
    if entry.shape != shape:
        raise AssemblyError(f"cell {cell}: local array of shape {entry.shape} for {shape} local DOFs")
    return entry


def _gather(values: Any, selectors: list, shapes: list[tuple], workers: int = 1) -> list[np.ndarray]:
    """Cell values of every selected block stacked into ``(ncells,) + shape`` arrays."""
    ncells = len(values)
    outs = [np.zeros((ncells,) + shape) for shape in shapes]

    def run(start: int, stop: int) -> None:
        cache = make_cache(values)
        for i in range(start, stop):
            value = get_with_cache(cache, values, i)
            for out, selector in zip(outs, selectors):
                entry = _entry(value, selector, out.shape[1:], i)
                if entry is not None:
                    out[i] = entry

    if workers > 1 and ncells > CHUNK_SIZE:
        starts = range(0, ncells, CHUNK_SIZE)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda s: run(s, min(s + CHUNK_SIZE, ncells)), starts))
    else:
        run(0, ncells)
    return outs


def _dirichlet_for(dirichlet_values: Any, col_block: int | None) -> np.ndarray | None:
    if dirichlet_values is None:
        return None
    if isinstance(dirichlet_values, (list, tuple)):
        return np.asarray(dirichlet_values[0 if col_block is None else col_block], dtype=float)
    return np.asarray(dirichlet_values, dtype=float)


def _accumulate(plan: AssemblyPlan, cell_mats: Any, cell_vecs: Any, dirichlet_values: Any, workers: int):
    data = None if cell_mats is None else np.zeros(plan.nnz + 1)
    vector = None if cell_vecs is None else np.zeros(plan.nrows + 1)

    if cell_vecs is not None:
        for tri, values in _sources(cell_vecs):
            entries = plan.row_entries(tri)
            if not entries:
                raise AssemblyError(f"the plan has no rows for the contribution on {tri!r}")
            selectors = [None if block is None else (block,) for block, _ in entries]
            gathered = _gather(values, selectors, [(rows.shape[1],) for _, rows in entries], workers)
            for (_, rows), local in zip(entries, gathered):
                slots = np.where(rows >= 0, rows, plan.nrows)
                vector += np.bincount(slots.ravel(), weights=local.ravel(), minlength=plan.nrows + 1)

    if cell_mats is not None:
        for tri, values in _sources(cell_mats):
            blocks = plan.blocks_on(tri)
            if not blocks:
                raise AssemblyError(f"the plan has no pattern for the contribution on {tri!r}")
            gathered = _gather(values, [b.selector for b in blocks], [b.local_shape for b in blocks], workers)
            for b, local in zip(blocks, gathered):
                data += np.bincount(b.slots.ravel(), weights=local.ravel(), minlength=plan.nnz + 1)
                g = _dirichlet_for(dirichlet_values, b.col_block) if vector is not None else None
                if g is None or not g.size:
                    continue
                constrained = b.cols < 0
                if not constrained.any():
                    continue
                local_g = np.where(constrained, g[np.where(constrained, -b.cols - 1, 0)], 0.0)
                correction = np.einsum("cij,cj->ci", local, local_g)
                slots = np.where(b.rows >= 0, b.rows, plan.nrows)
                vector -= np.bincount(slots.ravel(), weights=correction.ravel(), minlength=plan.nrows + 1)

    return (None if data is None else data[:plan.nnz]), (None if vector is None else vector[:plan.nrows])


def assemble_matrix(plan: AssemblyPlan, cell_mats: Any, workers: int = 1) -> sp.csr_matrix:
    data, _ = _accumulate(plan, cell_mats, None, None, workers)
    return plan.new_matrix(data)


def assemble_vector(
    plan: AssemblyPlan, cell_vecs: Any, cell_mats: Any = None, dirichlet_values: Any = None, workers: int = 1
) -> np.ndarray:
    """``b`` with ``A_local[:, dirichlet] @ g`` subtracted when cell matrices are given."""
    if cell_mats is None or dirichlet_values is None:
        return _accumulate(plan, None, cell_vecs, None, workers)[1]
    return _accumulate(plan, cell_mats, cell_vecs, dirichlet_values, workers)[1]


def assemble_matrix_and_vector(
    plan: AssemblyPlan, cell_mats: Any, cell_vecs: Any, dirichlet_values: Any = None, workers: int = 1
) -> tuple[sp.csr_matrix, np.ndarray]:
    data, vector = _accumulate(plan, cell_mats, cell_vecs, dirichlet_values, workers)
    return plan.new_matrix(data), vector


def reassemble_in_place(
    plan: AssemblyPlan,
    matrix: sp.csr_matrix,
    vector: np.ndarray | None,
    cell_mats: Any,
    cell_vecs: Any = None,
    dirichlet_values: Any = None,
    workers: int = 1,
) -> None:
    """Overwrite the values of a matrix (and vector) produced from ``plan``."""
    if not plan.owns(matrix):
        raise AssemblyError("matrix was not assembled with this plan")
    if vector is not None and np.shape(vector) != (plan.nrows,):
        raise AssemblyError(f"vector of shape {np.shape(vector)} for {plan.nrows} rows")
    data, values = _accumulate(plan, cell_mats, cell_vecs if vector is not None else None, dirichlet_values, workers)
    matrix.data[:] = data
    if vector is not None:
        vector[:] = values


def write_matrix_coo(matrix: Any, path: str | Path) -> None:
    """One ``row col value`` line per stored entry, 0-based."""
    coo = sp.coo_matrix(matrix)
    lines = [f"{r} {c} {v:.17g}" for r, c, v in zip(coo.row, coo.col, coo.data)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


class SparseMatrixAssembler:
    """Assembler bound to a trial and a test space (single- or multi-field)."""

    def __init__(self, trial: FESpace | MultiFieldFESpace, test: FESpace | MultiFieldFESpace, workers: int = 1):
        self.trial = trial
        self.test = test
        self.workers = max(int(workers), 1)
        self.trial_spaces, self.col_offsets = self._fields(trial)
        self.test_spaces, self.row_offsets = self._fields(test)

    @staticmethod
    def _fields(space: Any) -> tuple[list[FESpace], np.ndarray]:
        if isinstance(space, MultiFieldFESpace):
            return space.spaces, space.offsets
        return [space], np.zeros(2, dtype=np.int64)

    @property
    def num_rows(self) -> int:
        return self.test.num_free_dofs

    @property
    def num_cols(self) -> int:
        return self.trial.num_free_dofs

    def _ids(self, spaces: list[FESpace], offsets: np.ndarray, block: int | None, tri: Any) -> np.ndarray:
        k = 0 if block is None else block
        ids = spaces[k].cell_dof_array(tri)
        return np.where(ids >= 0, ids + offsets[k], ids) if offsets[k] else ids

    def dirichlet_values(self) -> list[np.ndarray]:
        return [s.dirichlet_values for s in self.trial_spaces]

    def plan(self, a: DomainContribution, l: DomainContribution | None = None) -> AssemblyPlan:
        blocks = []
        for tri, values in a.items():
            first = values[0] if len(values) else None
            positions = first.touched_positions() if isinstance(first, ArrayBlock) else [(None, None)]
            for i, j in positions:
                rows = self._ids(self.test_spaces, self.row_offsets, i, tri)
                cols = self._ids(self.trial_spaces, self.col_offsets, j, tri)
                blocks.append(PlanBlock(tri, i, j, rows, cols))
        plan = AssemblyPlan(self.num_rows, self.num_cols, blocks)
        for tri, values in (l.items() if l is not None else []):
            first = values[0] if len(values) else None
            positions = [p[0] for p in first.touched_positions()] if isinstance(first, ArrayBlock) else [None]
            for i in positions:
                if plan.vector_rows(tri, i) is None:
                    plan.add_rows(tri, i, self._ids(self.test_spaces, self.row_offsets, i, tri))
        return plan

    def vector_plan(self, l: DomainContribution) -> AssemblyPlan:
        plan = AssemblyPlan(self.num_rows, self.num_cols, [])
        for tri, values in l.items():
            first = values[0] if len(values) else None
            positions = [p[0] for p in first.touched_positions()] if isinstance(first, ArrayBlock) else [None]
            for i in positions:
                plan.add_rows(tri, i, self._ids(self.test_spaces, self.row_offsets, i, tri))
        return plan

    def assemble_matrix(self, a: DomainContribution, plan: AssemblyPlan | None = None) -> sp.csr_matrix:
        return assemble_matrix(plan or self.plan(a), a, self.workers)

    def assemble_vector(self, l: DomainContribution, a: DomainContribution | None = None,
                        plan: AssemblyPlan | None = None) -> np.ndarray:
        if plan is None:
            plan = self.plan(a, l) if a is not None else self.vector_plan(l)
        return assemble_vector(plan, l, a, self.dirichlet_values(), self.workers)

    def assemble_matrix_and_vector(self, a: DomainContribution, l: DomainContribution,
                                   plan: AssemblyPlan | None = None) -> tuple[sp.csr_matrix, np.ndarray]:
        plan = plan or self.plan(a, l)
        return assemble_matrix_and_vector(plan, a, l, self.dirichlet_values(), self.workers)

    def reassemble_in_place(self, plan: AssemblyPlan, matrix: sp.csr_matrix, vector: np.ndarray | None,
                            a: DomainContribution, l: DomainContribution | None = None) -> None:
        reassemble_in_place(plan, matrix, vector, a, l, self.dirichlet_values(), self.workers)
