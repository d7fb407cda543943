"""Stokes driver on Taylor-Hood P2/P1 elements.

The saddle-point system is assembled with a negative continuity row,

    int grad(u) : grad(v) - p div(v) - div(u) q = int f . v - g q,

which keeps the matrix symmetric for MINRES. With Dirichlet data on the whole
boundary the constant pressure mode is removed inside MINRES, and the solution
is pinned to zero mean pressure through the mass-weighted constant.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np
import scipy.sparse.linalg as spla

from ..assembly import AssemblyPlan, SparseMatrixAssembler
from ..celldata import CellField, DomainContribution, Measure, integrate, normal_vector
from ..fespaces import FEFunction, MultiFieldFESpace, fe_basis, make_fespace, mf_basis, mf_function, multi_field, multi_field_trial, trial_space
from ..fields import GenericField, divergence, gradient
from ..geometry import DiscreteModel, boundary_triangulation
from ..reffe import CellTopology, make_reference_fe
from ..solvers import SolveResult, minres_solve
from ..tensors import dot, inner
from .domain import build_model, ensure_boundary_tag, has_flow_tags
from .manufactured import StokesSolution, inlet_profile, stokes_solution, zero_velocity
from .poisson import error_norms
from .report import RunReport
from .vtk import write_vtk

logger = logging.getLogger(__name__)

VELOCITY_ORDER = 2
PRESSURE_ORDER = 1
QUADRATURE_DEGREE = 2 * VELOCITY_ORDER


@dataclass
class StokesProblem:
    model: DiscreteModel
    solution: StokesSolution | None
    test: MultiFieldFESpace
    trial: MultiFieldFESpace
    measure: Measure
    a: DomainContribution
    l: DomainContribution
    assembler: SparseMatrixAssembler
    pressure_mass: DomainContribution
    flow: bool = False
    tol: float = 1e-10
    maxit: int | None = None

    @property
    def num_dofs(self) -> int:
        return self.test.num_free_dofs

    @property
    def pressure_slice(self) -> slice:
        return slice(int(self.test.offsets[1]), int(self.test.offsets[2]))

    @cached_property
    def mass_matrix(self) -> Any:
        pressure = self.test[1]
        return SparseMatrixAssembler(trial_space(pressure), pressure).assemble_matrix(self.pressure_mass)

    def nullspace(self) -> np.ndarray | None:
        """Constant pressure mode, present when no boundary is left free."""
        if self.flow:
            return None
        v = np.zeros(self.num_dofs)
        v[self.pressure_slice] = 1.0
        return v

    def nullspace_weight(self) -> np.ndarray:
        """``w . x`` is the integral of the pressure of ``x``."""
        w = np.zeros(self.num_dofs)
        w[self.pressure_slice] = self.mass_matrix @ np.ones(self.mass_matrix.shape[1])
        return w

    def assemble(self, plan: AssemblyPlan | None = None) -> tuple[AssemblyPlan, Any, np.ndarray]:
        plan = plan or self.assembler.plan(self.a, self.l)
        A, b = self.assembler.assemble_matrix_and_vector(self.a, self.l, plan)
        return plan, A, b

    def preconditioner(self, A: Any) -> spla.LinearOperator:
        """Block Jacobi: ``|diag(A)|`` on velocities, the pressure mass diagonal on pressures."""
        diagonal = np.abs(np.asarray(A.diagonal(), dtype=float))
        diagonal[self.pressure_slice] = np.abs(self.mass_matrix.diagonal())
        inverse = np.where(diagonal > 0, 1.0 / np.where(diagonal > 0, diagonal, 1.0), 1.0)
        return spla.LinearOperator(A.shape, matvec=lambda v: inverse * np.ravel(v), dtype=float)

    def solve(self, A: Any, b: np.ndarray) -> SolveResult:
        return minres_solve(
            A, b, tol=self.tol, maxit=self.maxit, nullspace=self.nullspace(),
            precond=self.preconditioner(A), raise_on_failure=False,
            nullspace_weight=None if self.flow else self.nullspace_weight(),
        )

    def fe_functions(self, x: np.ndarray) -> tuple[FEFunction, FEFunction]:
        uh, ph = mf_function(self.trial, x)
        return uh, ph

    def volume(self) -> float:
        return integrate(1.0, self.measure).sum()

    def pressure_mean(self, ph: CellField) -> float:
        return integrate(ph, self.measure).sum() / self.volume()

    def errors(self, uh: FEFunction, ph: CellField) -> dict[str, float]:
        if self.solution is None:
            return {}
        measure = Measure(self.model.bulk, QUADRATURE_DEGREE + 2)
        u_errors = error_norms(self.solution.velocity_field(), GenericField(self.solution.grad_u), uh, measure)
        p_exact = CellField.from_function(self.model.bulk, self.solution.pressure_field())
        p_mean = integrate(p_exact, measure).sum() / self.volume()
        p = self.solution.p
        shifted = GenericField(lambda x: p(x) - p_mean)
        p_errors = error_norms(shifted, None, ph - self.pressure_mean(ph), measure)
        return {"h1": u_errors["h1"], "l2": u_errors["l2"], "p_l2": p_errors["l2"]}

    def fluxes(self, uh: FEFunction) -> dict[str, float]:
        """Volume flow through the inlet and the outlet of the flow configuration."""
        out = {}
        for tag in ("inlet", "outlet"):
            btri = boundary_triangulation(self.model, tag)
            out[tag] = integrate(dot(normal_vector(btri), uh), Measure(btri, QUADRATURE_DEGREE)).sum()
        return out


def _check_topology(model: DiscreteModel) -> None:
    if model.topology not in (CellTopology.TRI, CellTopology.TET):
        raise ValueError(f"Taylor-Hood elements need simplices, got {model.topology.value}")


def setup_stokes(cfg: Any, model: DiscreteModel, solution: StokesSolution | None = None) -> StokesProblem:
    _check_topology(model)
    dim = model.dim
    flow = solution is None and has_flow_tags(model)
    tri = model.bulk
    velocity_reffe = make_reference_fe(model.topology, VELOCITY_ORDER, (dim,))
    pressure_reffe = make_reference_fe(model.topology, PRESSURE_ORDER)

    if flow:
        if dim != 3:
            raise ValueError("the channel flow configuration is three-dimensional")
        tags = ["inlet", "noslip", ("ux0", (True, False, False))]
        V = make_fespace(model, velocity_reffe, tags)
        functions = [inlet_profile, zero_velocity(dim), zero_velocity(dim)]
        force = CellField.from_function(tri, GenericField(zero_velocity(dim)))
        source = 0.0
    else:
        solution = solution or stokes_solution(dim)
        ensure_boundary_tag(model)
        V = make_fespace(model, velocity_reffe, ["boundary"])
        functions = [solution.u]
        force = CellField.from_function(tri, GenericField(solution.force))
        source = CellField.from_function(tri, GenericField(solution.divergence))
    Q = make_fespace(model, pressure_reffe)
    Y = multi_field([V, Q])
    X = multi_field_trial(Y, [functions, None])

    measure = Measure(tri, QUADRATURE_DEGREE)
    v, q = mf_basis(Y, "test")
    du, dp = mf_basis(X, "trial")
    a = integrate(inner(gradient(du), gradient(v)) - dp * divergence(v) - divergence(du) * q, measure)
    l = integrate(dot(force, v) - source * q, measure)
    pressure_mass = integrate(fe_basis(Q, "trial") * fe_basis(Q, "test"), measure)
    assembler = SparseMatrixAssembler(X, Y, getattr(cfg, "workers", 1))
    logger.info(
        "stokes: %d velocity DOFs, %d pressure DOFs, %d Dirichlet DOFs",
        V.num_free_dofs, Q.num_free_dofs, V.num_dirichlet_dofs,
    )
    return StokesProblem(
        model, None if flow else solution, Y, X, measure, a, l, assembler, pressure_mass,
        flow, cfg.tol, cfg.maxit,
    )


@dataclass
class StokesRun:
    problem: StokesProblem
    uh: FEFunction
    ph: FEFunction
    result: SolveResult
    report: RunReport


def solve_stokes(cfg: Any, model: DiscreteModel | None = None, solution: StokesSolution | None = None) -> StokesRun:
    start = time.perf_counter()
    mesh_io = None
    if model is None:
        model, mesh_io = build_model(cfg)
    problem = setup_stokes(cfg, model, solution)
    _, A, b = problem.assemble()
    from_scratch = time.perf_counter() - start

    start = time.perf_counter()
    result = problem.solve(A, b)
    solve_s = time.perf_counter() - start
    uh, ph = problem.fe_functions(result.x)
    details: dict[str, Any] = {"cells": model.num_cells, "topology": model.topology.value, "flow": problem.flow}
    if problem.flow:
        details.update({f"{tag}_flux": value for tag, value in problem.fluxes(uh).items()})
    else:
        details["pressure_mean"] = problem.pressure_mean(ph)
    errors = problem.errors(uh, ph)
    logger.info("stokes: %d iterations, residual %.3e", result.iterations, result.residual)

    report = RunReport(
        problem="stokes",
        dofs=problem.num_dofs,
        errors=errors,
        timings={"from_scratch_s": from_scratch, "in_place_s": None, "solve_s": solve_s, "mesh_io_s": mesh_io},
        iterations=result.iterations,
        converged=result.converged,
        residual=result.residual,
        details=details,
    )
    if cfg.vtk:
        write_vtk(model.bulk, {"uh": uh, "ph": ph}, cfg.vtk, refine=True)
    return StokesRun(problem, uh, ph, result, report)


def run_stokes(cfg: Any, model: DiscreteModel | None = None) -> RunReport:
    return solve_stokes(cfg, model).report
