import numpy as np
import pytest

from conftest import slow
from lazyfem.celldata import integrate
from lazyfem.fields import GenericField, gradient
from lazyfem.geometry import cartesian_model
from lazyfem.services.benchmark import benchmark
from lazyfem.services.domain import channel_model
from lazyfem.services.manufactured import StokesSolution, polynomial_solution, sine_solution, zero_velocity
from lazyfem.services.poisson import run_poisson, solve_poisson
from lazyfem.services.report import TIMING_KEYS, RunReport
from lazyfem.services.stokes import setup_stokes, solve_stokes
from lazyfem.services.vtk import read_vtk_point_data, write_vtk
from lazyfem.solvers import minres_solve


@pytest.mark.parametrize(
    "partitions, order, simplexify",
    [((4,), 3, False), ((2, 2), 2, False), ((3, 2), 4, True), ((2, 2, 2), 2, True), ((2, 2, 2), 1, False)],
)
def test_poisson_reproduces_polynomials_of_the_element_order(make_config, partitions, order, simplexify):
    cfg = make_config(partitions=partitions, order=order, simplexify=simplexify, tol=1e-12)
    run = solve_poisson(cfg)
    assert run.result.converged
    assert run.report.errors["h1"] < 1e-8
    assert run.report.errors["l2"] < 1e-8


def test_poisson_with_a_neumann_side(make_config):
    cfg = make_config(partitions=(3, 3), order=2, neumann_tags=("xmax", "ymin"), tol=1e-12)
    run = solve_poisson(cfg)
    assert run.problem.test.num_dirichlet_dofs == 13
    assert run.report.errors["h1"] < 1e-8


def test_poisson_sine_convergence_rates(make_config):
    errors = []
    for n in (4, 8):
        cfg = make_config(partitions=(n, n), solution="sine", simplexify=True)
        errors.append(run_poisson(cfg).errors)
    h1_rate = np.log2(errors[0]["h1"] / errors[1]["h1"])
    l2_rate = np.log2(errors[0]["l2"] / errors[1]["l2"])
    assert 0.8 < h1_rate < 1.3
    assert l2_rate > 1.7


def test_poisson_report_layout(make_config):
    report = run_poisson(make_config(partitions=(2, 2), order=1)).to_dict()
    assert set(report["timings"]) == set(TIMING_KEYS)
    assert report["timings"]["in_place_s"] is None
    assert report["timings"]["mesh_io_s"] is None
    assert report["dofs"] == 1
    assert report["details"]["cells"] == 4
    assert RunReport.from_dict(report).to_dict() == report


def test_poisson_vtk_output(make_config, tmp_path):
    path = tmp_path / "poisson.vtk"
    solve_poisson(make_config(partitions=(2, 3), order=1, vtk=str(path)))
    points, data = read_vtk_point_data(path)
    assert len(points) == 3 * 4
    assert np.allclose(data["uh"], points[:, 0] + points[:, 1], atol=1e-8)
    assert np.allclose(data["eh"], 0.0, atol=1e-8)


def test_refined_vtk_output_samples_quadratics(make_config, tmp_path):
    path = tmp_path / "poisson2.vtk"
    solve_poisson(make_config(partitions=(2, 2), order=2, simplexify=True, vtk=str(path)))
    points, data = read_vtk_point_data(path)
    assert len(points) == 8 * 6
    assert np.allclose(data["uh"], (points[:, 0] + points[:, 1]) ** 2, atol=1e-8)


def test_stokes_cell_matrix_has_an_empty_pressure_block(make_config):
    model = cartesian_model((0, 0), (1, 1), (2, 2), simplexify=True)
    problem = setup_stokes(make_config(problem="stokes", partitions=(2, 2), simplexify=True), model)
    cell = problem.a[model.bulk][0]
    assert cell.touched.tolist() == [[True, True], [True, False]]
    assert cell[0, 0].shape == (12, 12)
    assert cell[0, 1].shape == (12, 3)
    assert cell[1, 0].shape == (3, 12)
    vector = problem.l[model.bulk][0]
    assert vector.touched.tolist() == [True, True]


@pytest.mark.parametrize("partitions", [(3, 3), (2, 2, 2)])
def test_stokes_reproduces_the_quadratic_velocity(make_config, partitions):
    cfg = make_config(problem="stokes", partitions=partitions, simplexify=True, tol=1e-12)
    run = solve_stokes(cfg)
    assert run.report.errors["h1"] < 1e-6
    assert run.report.errors["l2"] < 1e-6
    assert np.isfinite(run.report.errors["p_l2"])
    assert abs(run.report.details["pressure_mean"]) < 1e-10
    assert run.report.dofs == run.problem.test.offsets[-1]


def test_minres_returns_a_zero_mean_stokes_pressure(make_config):
    model = cartesian_model((0, 0), (1, 1), (3, 3), simplexify=True)
    problem = setup_stokes(make_config(problem="stokes", partitions=(3, 3), simplexify=True), model)
    weight = problem.nullspace_weight()
    assert weight[problem.pressure_slice].sum() == pytest.approx(1.0)
    assert not weight[: problem.pressure_slice.start].any()
    _, A, b = problem.assemble()
    result = minres_solve(
        A, b, tol=1e-10, nullspace=problem.nullspace(), nullspace_weight=weight,
        precond=problem.preconditioner(A), raise_on_failure=False,
    )
    _, ph = problem.fe_functions(result.x)
    assert abs(integrate(ph, problem.measure).sum()) < 1e-10
    assert result.residual < 1e-8


def test_stokes_rejects_quads(make_config):
    cfg = make_config(problem="stokes", partitions=(2, 2), simplexify=True)
    with pytest.raises(ValueError):
        setup_stokes(cfg, cartesian_model((0, 0), (1, 1), (2, 2)))


def test_channel_flow_conserves_mass(make_config):
    cfg = make_config(problem="stokes", geometry="channel", partitions=(2, 2, 2), simplexify=True, tol=1e-12)
    run = solve_stokes(cfg, channel_model((2, 2, 2)))
    details = run.report.details
    assert details["flow"] is True
    assert details["inlet_flux"] < 0
    assert details["inlet_flux"] + details["outlet_flux"] == pytest.approx(0.0, abs=1e-6)
    assert run.report.errors == {}


def test_poisson_benchmark(make_config):
    report = benchmark(make_config(partitions=(3, 3), order=2, repeats=2, tol=1e-12))
    data = report.to_dict()
    assert data["timings"]["from_scratch_s"] > 0
    assert data["timings"]["in_place_s"] > 0
    assert data["timings"]["solve_s"] >= 0
    assert data["details"]["reassembly_max_diff"] == 0.0
    assert len(data["details"]["in_place_runs"]) == 2
    assert data["errors"]["h1"] < 1e-8


def test_stokes_benchmark(make_config):
    report = benchmark(make_config(problem="stokes", partitions=(2, 2), simplexify=True, repeats=1))
    assert report.details["reassembly_max_diff"] == 0.0
    assert report.details["nnz"] > 0
    assert "p_l2" in report.errors


def test_benchmark_rejects_unknown_problems(make_config):
    cfg = make_config()
    cfg.problem = "heat"
    with pytest.raises(ValueError):
        benchmark(cfg)


@pytest.mark.parametrize("solution", [polynomial_solution(3, 3), polynomial_solution(2, 1), sine_solution(2)])
def test_manufactured_loads_match_dual_number_laplacians(solution, rng):
    xs = rng.random((9, solution.dim))
    hessian = gradient(solution.gradient_field()).evaluate(None, xs)
    laplacian = np.trace(hessian, axis1=1, axis2=2)
    assert np.allclose(-laplacian, GenericField(solution.source).evaluate(None, xs), atol=1e-10)
    automatic = gradient(GenericField(solution.u)).evaluate(None, xs)
    assert np.allclose(automatic, solution.gradient_field().evaluate(None, xs))


def test_zero_stokes_data_gives_zero_solution(make_config):
    zero = lambda x: 0.0 * x[0]
    solution = StokesSolution(
        "zero", 2, zero_velocity(2), lambda x: [[zero(x)] * 2] * 2, zero, zero_velocity(2), zero
    )
    cfg = make_config(problem="stokes", partitions=(2, 2), simplexify=True)
    run = solve_stokes(cfg, cartesian_model((0, 0), (1, 1), (2, 2), simplexify=True), solution)
    assert run.result.iterations == 0
    assert np.all(run.result.x == 0.0)
    assert np.all(run.uh.free_values == 0.0)


def test_vector_fields_are_written_with_three_components(square, tmp_path):
    path = tmp_path / "vector.vtk"
    write_vtk(square.bulk, {"x": lambda x: [x[0], 2.0 * x[1]]}, path)
    points, data = read_vtk_point_data(path)
    assert data["x"].shape == (9, 3)
    assert np.allclose(data["x"][:, 0], points[:, 0])
    assert np.allclose(data["x"][:, 1], 2.0 * points[:, 1])
    assert np.all(data["x"][:, 2] == 0.0)


@slow
@pytest.mark.parametrize("simplexify", [False, True])
def test_poisson_quadratic_on_the_eight_cube(make_config, simplexify):
    report = run_poisson(make_config(partitions=(8, 8, 8), order=2, simplexify=simplexify))
    assert report.errors["h1"] < 1e-9


@slow
def test_stokes_on_the_four_cube(make_config):
    report = solve_stokes(make_config(problem="stokes", partitions=(4, 4, 4), simplexify=True)).report
    assert report.errors["h1"] < 1e-7
    assert report.errors["p_l2"] < 1e-7
    assert abs(report.details["pressure_mean"]) < 1e-10


@slow
@pytest.mark.parametrize("order", [1, 2])
def test_poisson_h1_slope_equals_the_order(make_config, order):
    sizes = [4, 8, 16]
    errors = [run_poisson(make_config(partitions=(n, n), order=order, solution="sine")).errors["h1"] for n in sizes]
    slope = -np.polyfit(np.log(1.0 / np.array(sizes)), np.log(errors), 1)[0]
    assert abs(-slope - order) < 0.2


@slow
def test_in_place_assembly_is_cheaper(make_config):
    for n in (8, 16):
        report = benchmark(make_config(partitions=(n, n, n), simplexify=True, repeats=2))
        assert report.timings["in_place_s"] < report.timings["from_scratch_s"]
