"""Two-phase assembly benchmark.

"From scratch" covers everything from building (or reading) the mesh to the
assembled matrix and vector. "In place" only recomputes the values into the
frozen pattern of the last from-scratch system. Both report the minimum over
``cfg.repeats`` runs after one excluded warm-up run.
"""
from __future__ import annotations

import logging
import time
from typing import Any, Callable

import numpy as np

from ..geometry import DiscreteModel
from .domain import build_model
from .poisson import PoissonProblem, setup_poisson
from .report import RunReport
from .stokes import StokesProblem, setup_stokes

logger = logging.getLogger(__name__)

SETUPS: dict[str, Callable[[Any, DiscreteModel], Any]] = {
    "poisson": setup_poisson,
    "stokes": setup_stokes,
}


def _from_scratch(cfg: Any, setup: Callable) -> tuple[float, float | None, Any, Any, Any, np.ndarray]:
    start = time.perf_counter()
    model, mesh_io = build_model(cfg)
    problem = setup(cfg, model)
    plan, A, b = problem.assemble()
    return time.perf_counter() - start, mesh_io, problem, plan, A, b


def _errors(problem: PoissonProblem | StokesProblem, x: np.ndarray) -> dict[str, float]:
    if isinstance(problem, StokesProblem):
        uh, ph = problem.fe_functions(x)
        if not problem.flow:
            ph = ph - problem.pressure_mean(ph)
        return problem.errors(uh, ph)
    return problem.errors(problem.fe_function(x))


def benchmark(cfg: Any) -> RunReport:
    try:
        setup = SETUPS[cfg.problem]
    except KeyError:
        raise ValueError(f"unknown problem {cfg.problem!r}") from None
    repeats = int(cfg.repeats)

    _from_scratch(cfg, setup)
    scratch_times, io_times = [], []
    for _ in range(repeats):
        elapsed, mesh_io, problem, plan, A, b = _from_scratch(cfg, setup)
        scratch_times.append(elapsed)
        if mesh_io is not None:
            io_times.append(mesh_io)
    logger.info("%s: from scratch %.4fs (min of %d)", cfg.problem, min(scratch_times), repeats)

    fresh_A, fresh_b = A.copy(), b.copy()
    problem.assembler.reassemble_in_place(plan, A, b, problem.a, problem.l)
    in_place_times = []
    for _ in range(repeats):
        start = time.perf_counter()
        problem.assembler.reassemble_in_place(plan, A, b, problem.a, problem.l)
        in_place_times.append(time.perf_counter() - start)
    logger.info("%s: in place %.4fs (min of %d)", cfg.problem, min(in_place_times), repeats)
    matrix_diff = float(np.max(np.abs(A.data - fresh_A.data), initial=0.0))
    vector_diff = float(np.max(np.abs(b - fresh_b), initial=0.0))

    start = time.perf_counter()
    result = problem.solve(A, b)
    solve_s = time.perf_counter() - start

    return RunReport(
        problem=cfg.problem,
        dofs=problem.num_dofs,
        errors=_errors(problem, result.x),
        timings={
            "from_scratch_s": min(scratch_times),
            "in_place_s": min(in_place_times),
            "solve_s": solve_s,
            "mesh_io_s": min(io_times) if io_times else None,
        },
        iterations=result.iterations,
        converged=result.converged,
        residual=result.residual,
        details={
            "repeats": repeats,
            "cells": problem.model.num_cells,
            "nnz": int(A.nnz),
            "reassembly_max_diff": max(matrix_diff, vector_diff),
            "from_scratch_runs": scratch_times,
            "in_place_runs": in_place_times,
        },
    )
