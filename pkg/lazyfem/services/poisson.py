"""Poisson driver: find u_h with u_h = u on the Dirichlet boundary such that
``int grad(u_h) . grad(v) = int f v + int (n . grad u) v`` for every test function v.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..assembly import AssemblyPlan, SparseMatrixAssembler
from ..celldata import CellField, DomainContribution, Measure, integrate, normal_vector
from ..fespaces import FEFunction, FESpace, fe_basis, make_fespace, trial_space
from ..fields import Field, GenericField, gradient
from ..geometry import DiscreteModel, boundary_triangulation
from ..reffe import make_reference_fe
from ..solvers import SolveResult, cg_solve
from ..tensors import dot, inner
from .domain import build_model, ensure_boundary_tag
from .manufactured import ScalarSolution, scalar_solution
from .report import RunReport
from .vtk import write_vtk

logger = logging.getLogger(__name__)


def error_norms(exact: Field, exact_gradient: Field | None, approx: CellField, measure: Measure) -> dict[str, float]:
    """L2 and (with a gradient) H1 norms of ``exact - approx``."""
    tri = measure.tri
    exact_cf = CellField.from_function(tri, exact)
    e = exact_cf - approx
    l2_sq = max(integrate(inner(e, e), measure).sum(), 0.0)
    errors = {"l2": float(np.sqrt(l2_sq))}
    if exact_gradient is not None:
        ge = CellField.from_function(tri, exact_gradient) - gradient(approx)
        h1_sq = l2_sq + max(integrate(inner(ge, ge), measure).sum(), 0.0)
        errors["h1"] = float(np.sqrt(h1_sq))
    return errors


@dataclass
class PoissonProblem:
    model: DiscreteModel
    solution: ScalarSolution
    test: FESpace
    trial: FESpace
    measure: Measure
    a: DomainContribution
    l: DomainContribution
    assembler: SparseMatrixAssembler
    tol: float = 1e-10
    maxit: int | None = None

    @property
    def num_dofs(self) -> int:
        return self.test.num_free_dofs

    def assemble(self, plan: AssemblyPlan | None = None) -> tuple[AssemblyPlan, Any, np.ndarray]:
        plan = plan or self.assembler.plan(self.a, self.l)
        A, b = self.assembler.assemble_matrix_and_vector(self.a, self.l, plan)
        return plan, A, b

    def solve(self, A: Any, b: np.ndarray) -> SolveResult:
        return cg_solve(A, b, tol=self.tol, maxit=self.maxit, raise_on_failure=False)

    def fe_function(self, x: np.ndarray) -> FEFunction:
        return FEFunction(self.trial, x)

    def errors(self, uh: FEFunction) -> dict[str, float]:
        k = self.test.reffe.order
        measure = Measure(self.model.bulk, 2 * k + 2)
        return error_norms(self.solution.field(), self.solution.gradient_field(), uh, measure)


def setup_poisson(cfg: Any, model: DiscreteModel, solution: ScalarSolution | None = None) -> PoissonProblem:
    k = cfg.order
    solution = solution or scalar_solution(cfg.solution, model.dim, k)
    ensure_boundary_tag(model)
    neumann = list(cfg.neumann_tags)
    dirichlet_tag = "boundary"
    if neumann:
        dirichlet_tag = "dirichlet"
        facets = np.setdiff1d(model.tagged_facets("boundary"), model.tagged_facets(neumann))
        model.add_tag(dirichlet_tag, facets)

    reffe = make_reference_fe(model.topology, k)
    test = make_fespace(model, reffe, [dirichlet_tag])
    trial = trial_space(test, solution.u)
    tri = model.bulk
    measure = Measure(tri, 2 * k)
    v = fe_basis(test, "test")
    du = fe_basis(trial, "trial")
    f = CellField.from_function(tri, GenericField(solution.source))
    a = integrate(dot(gradient(du), gradient(v)), measure)
    l = integrate(f * v, measure)
    if neumann:
        btri = boundary_triangulation(model, neumann)
        boundary_measure = Measure(btri, 2 * k)
        flux = dot(normal_vector(btri), CellField.from_function(btri, solution.gradient_field()))
        l = l + integrate(flux * v, boundary_measure)
    assembler = SparseMatrixAssembler(trial, test, getattr(cfg, "workers", 1))
    logger.info("poisson: %d free DOFs, %d Dirichlet DOFs", test.num_free_dofs, test.num_dirichlet_dofs)
    return PoissonProblem(model, solution, test, trial, measure, a, l, assembler, cfg.tol, cfg.maxit)


@dataclass
class PoissonRun:
    problem: PoissonProblem
    uh: FEFunction
    result: SolveResult
    report: RunReport


def solve_poisson(cfg: Any, model: DiscreteModel | None = None, solution: ScalarSolution | None = None) -> PoissonRun:
    start = time.perf_counter()
    mesh_io = None
    if model is None:
        model, mesh_io = build_model(cfg)
    problem = setup_poisson(cfg, model, solution)
    _, A, b = problem.assemble()
    from_scratch = time.perf_counter() - start

    start = time.perf_counter()
    result = problem.solve(A, b)
    solve_s = time.perf_counter() - start
    uh = problem.fe_function(result.x)
    errors = problem.errors(uh)
    logger.info("poisson: %d iterations, h1 error %.3e", result.iterations, errors["h1"])

    report = RunReport(
        problem="poisson",
        dofs=problem.num_dofs,
        errors=errors,
        timings={"from_scratch_s": from_scratch, "in_place_s": None, "solve_s": solve_s, "mesh_io_s": mesh_io},
        iterations=result.iterations,
        converged=result.converged,
        residual=result.residual,
        details={"order": cfg.order, "cells": model.num_cells, "topology": model.topology.value},
    )
    if cfg.vtk:
        error = CellField.from_function(model.bulk, problem.solution.field()) - uh
        write_vtk(model.bulk, {"uh": uh, "eh": error}, cfg.vtk, refine=cfg.order > 1)
    return PoissonRun(problem, uh, result, report)


def run_poisson(cfg: Any, model: DiscreteModel | None = None) -> RunReport:
    return solve_poisson(cfg, model).report
