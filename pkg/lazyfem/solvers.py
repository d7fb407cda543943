"""Krylov solvers for the assembled systems: CG for SPD and MINRES for symmetric indefinite ones.

Both wrap ``scipy.sparse.linalg`` and restart from the last iterate until the
true relative residual ``||b - A x|| / ||b||`` meets the tolerance, so the
reported residual never relies on the recursively updated one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import scipy.sparse.linalg as spla

from .errors import SolverBreakdownError, SolverConvergenceError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
MAX_RESTARTS = 8


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)
    converged: bool = True


def relative_residual(A: Any, b: np.ndarray, x: np.ndarray) -> float:
    norm_b = float(np.linalg.norm(b))
    r = float(np.linalg.norm(b - A @ x))
    return r / norm_b if norm_b > 0 else r


def jacobi_preconditioner(A: Any) -> spla.LinearOperator:
    """Inverse of ``|diag(A)|``; zero diagonal entries are left unscaled."""
    diagonal = np.abs(np.asarray(A.diagonal(), dtype=float))
    inverse = np.where(diagonal > 0, 1.0 / np.where(diagonal > 0, diagonal, 1.0), 1.0)
    return spla.LinearOperator(A.shape, matvec=lambda v: inverse * np.ravel(v), dtype=float)


def _identity(x: np.ndarray) -> np.ndarray:
    return x


def _preconditioner(A: Any, precond: Any) -> Any:
    if precond is None or precond == "none":
        return None
    if precond == "jacobi":
        return jacobi_preconditioner(A)
    if isinstance(precond, str):
        raise ValueError(f"unknown preconditioner {precond!r}")
    return precond


def _restarted(
    method: Callable,
    name: str,
    A: Any,
    b: np.ndarray,
    tol: float,
    maxit: int | None,
    M: Any,
    x0: np.ndarray | None,
    project: Callable[[np.ndarray], np.ndarray],
    raise_on_failure: bool,
) -> SolveResult:
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"system of shape {A.shape} with right-hand side of shape {b.shape}")
    x = project(np.zeros(n) if x0 is None else np.array(x0, dtype=float))
    if not np.linalg.norm(b):
        return SolveResult(np.zeros(n), 0, 0.0, [0.0])
    maxit = 10 * n if maxit is None else int(maxit)
    iterations = 0
    history = [relative_residual(A, b, x)]
    inner_tol = tol

    def count(_: Any) -> None:
        nonlocal iterations
        iterations += 1

    for restart in range(MAX_RESTARTS):
        if history[-1] <= tol or iterations >= maxit:
            break
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            x, info = method(A, b, x0=x, rtol=inner_tol, maxiter=maxit - iterations, M=M, callback=count)
        if info < 0 or not np.all(np.isfinite(x)):
            raise SolverBreakdownError(f"{name} broke down after {iterations} iterations")
        x = project(x)
        history.append(relative_residual(A, b, x))
        logger.debug("%s pass %d: %d iterations, residual %.3e", name, restart, iterations, history[-1])
        inner_tol = max(inner_tol * 0.1, 1e-16)

    result = SolveResult(x, iterations, history[-1], history, history[-1] <= tol)
    if not result.converged:
        message = f"{name} did not reach {tol:.1e} in {iterations} iterations (residual {result.residual:.3e})"
        if raise_on_failure:
            raise SolverConvergenceError(message, history, x, iterations)
        logger.warning(message)
    return result


def cg_solve(
    A: Any,
    b: Any,
    tol: float = DEFAULT_TOL,
    maxit: int | None = None,
    precond: Any = "jacobi",
    x0: Any = None,
    raise_on_failure: bool = True,
) -> SolveResult:
    """Conjugate gradients for a symmetric positive definite ``A``."""
    b = np.asarray(b, dtype=float)
    return _restarted(spla.cg, "cg", A, b, tol, maxit, _preconditioner(A, precond), x0, _identity, raise_on_failure)


def minres_solve(
    A: Any,
    b: Any,
    tol: float = DEFAULT_TOL,
    maxit: int | None = None,
    nullspace: Any = None,
    precond: Any = None,
    x0: Any = None,
    raise_on_failure: bool = True,
    nullspace_weight: Any = None,
) -> SolveResult:
    """MINRES for a symmetric ``A`` with an optional one-dimensional kernel ``nullspace``.

    ``b`` is made orthogonal to the kernel vector ``v``. The solution is fixed
    along ``v`` by ``w . x = 0`` with ``w = nullspace_weight`` (default ``v``),
    e.g. the mass-weighted constant for a zero-mean pressure.
    """
    b = np.asarray(b, dtype=float)
    project = _identity
    if nullspace is not None:
        v = np.asarray(nullspace, dtype=float)
        w = v if nullspace_weight is None else np.asarray(nullspace_weight, dtype=float)
        scale = float(w @ v)
        if v.shape != b.shape or w.shape != b.shape or scale == 0.0:
            raise ValueError("nullspace and its weight must match b and must not be orthogonal")
        b = b - v * ((v @ b) / (v @ v))

        def project(x: np.ndarray) -> np.ndarray:
            return x - v * ((w @ x) / scale)

    return _restarted(spla.minres, "minres", A, b, tol, maxit, _preconditioner(A, precond), x0, project, raise_on_failure)
