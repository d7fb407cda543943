import numpy as np
import pytest

from lazyfem.arrays import collect
from lazyfem.celldata import CellPoint
from lazyfem.errors import LengthMismatchError, UnsupportedElementError
from lazyfem.fespaces import (
    fe_basis,
    fe_function,
    interpolate,
    make_fespace,
    mf_basis,
    mf_function,
    multi_field,
    multi_field_trial,
    trial_space,
)
from lazyfem.geometry import cartesian_model
from lazyfem.reffe import CellTopology, make_reference_fe


@pytest.fixture()
def two_by_two():
    return cartesian_model((0, 0), (2, 2), (2, 2))


def test_p1_dof_counts(two_by_two):
    assert make_fespace(two_by_two, 1).num_free_dofs == 9
    V = make_fespace(two_by_two, 1, ["boundary"])
    assert V.num_free_dofs == 1
    assert V.num_dirichlet_dofs == 8


def test_signed_cell_dof_ids(two_by_two):
    V = make_fespace(two_by_two, 1, "boundary")
    for row in V.cell_dof_ids:
        assert sorted(row.tolist())[-1] == 0
        assert (row < 0).sum() == 3
    negatives = np.unique(V.cell_dof_ids[V.cell_dof_ids < 0])
    assert sorted((-negatives - 1).tolist()) == list(range(8))


def test_q2_counts_nodes_across_cells(square):
    V = make_fespace(square, 2)
    assert V.num_free_dofs == 5 * 5
    W = make_fespace(cartesian_model((0, 0), (1, 1), (2, 2), simplexify=True), 3)
    assert W.num_free_dofs == 7 * 7


def test_component_mask_constrains_one_component():
    model = cartesian_model((0, 0, 0), (1, 1, 1), (1, 1, 1))
    V = make_fespace(model, 2, [("xmin", (True, False, False))], value_shape=(3,))
    assert V.num_free_dofs + V.num_dirichlet_dofs == 27 * 3
    assert V.num_dirichlet_dofs == 9
    assert np.all(V.dirichlet_dof_global % 3 == 0)
    nodes = V.node_coordinates[V.dirichlet_dof_global // 3]
    assert np.allclose(nodes[:, 0], 0.0)


def test_bad_mask_and_mismatched_element(square, triangles):
    with pytest.raises(ValueError):
        make_fespace(square, 1, [("xmin", (True, False))])
    with pytest.raises(UnsupportedElementError):
        make_fespace(triangles, make_reference_fe(CellTopology.QUAD, 1))


def test_trial_space_values(two_by_two):
    V = make_fespace(two_by_two, 1, "boundary")
    assert np.all(trial_space(V).dirichlet_values == 0.0)
    assert np.all(trial_space(V, 0.0).dirichlet_values == 0.0)
    U = trial_space(V, lambda x: x[0])
    assert np.allclose(U.dirichlet_values, V.node_coordinates[V.dirichlet_dof_global, 0])
    assert np.all(V.dirichlet_values == 0.0)
    with pytest.raises(LengthMismatchError):
        trial_space(V, [lambda x: x[0], lambda x: x[1]])


def test_quadratic_boundary_data_is_reproduced():
    model = cartesian_model((0, 0, 0), (1, 1, 1), (2, 2, 2), simplexify=True)
    g = lambda x: (x[0] + x[1] + x[2]) ** 2
    V = make_fespace(model, 2, "boundary")
    U = trial_space(V, g)
    nodes = V.node_coordinates[V.dirichlet_dof_global]
    assert np.max(np.abs(U.dirichlet_values - g(nodes.T))) < 1e-12


def test_test_basis_at_its_nodes_is_the_identity(triangles):
    V = make_fespace(triangles, 2)
    x = CellPoint.reference(V.tri, V.reffe.node_coordinates)
    for value in collect(fe_basis(V, "test")(x)):
        assert np.allclose(value, np.eye(V.reffe.num_dofs), atol=1e-12)
        assert value.shape[1] == V.reffe.num_dofs


def test_interpolated_constant(square):
    uh = interpolate(1.0, make_fespace(square, 2, "xmin"))
    assert np.all(uh.free_values == 1.0)
    assert np.all(uh.dirichlet_values == 1.0)
    for value in collect(uh(CellPoint.reference(square.bulk, [[0.2, 0.3], [0.9, 0.1]]))):
        assert np.allclose(value, 1.0)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_interpolation_reproduces_polynomials(order, triangles, rng):
    g = lambda x: (1.0 + x[0] - 2.0 * x[1]) ** order
    uh = interpolate(g, make_fespace(triangles, order))
    x = CellPoint.reference(triangles.bulk, rng.dirichlet([1, 1, 1], size=6)[:, :2])
    values = collect(uh(x))
    points = collect(x.to_physical().points)
    for value, p in zip(values, points):
        assert np.allclose(value, g(p.T), atol=1e-11)


def test_fe_function_length_is_checked(square):
    V = make_fespace(square, 1)
    with pytest.raises(LengthMismatchError):
        fe_function(V, np.zeros(V.num_free_dofs + 1))
    uh = fe_function(V, np.arange(V.num_free_dofs, dtype=float))
    assert len(uh) == square.num_cells


def test_multi_field_offsets(triangles):
    V = make_fespace(triangles, 2, "boundary", value_shape=(2,))
    Q = make_fespace(triangles, 1)
    Y = multi_field([V, Q])
    assert Y.offsets.tolist() == [0, V.num_free_dofs, V.num_free_dofs + Q.num_free_dofs]
    assert Y.num_free_dofs == V.num_free_dofs + Q.num_free_dofs
    uh, ph = mf_function(Y, np.arange(Y.num_free_dofs, dtype=float))
    assert ph.free_values[0] == V.num_free_dofs
    with pytest.raises(LengthMismatchError):
        mf_function(Y, np.zeros(3))
    v, q = mf_basis(Y, "test")
    assert (v.test.block, v.test.num_blocks) == (0, 2)
    assert (q.test.block, q.test.num_blocks) == (1, 2)
    X = multi_field_trial(Y, [lambda x: [x[0], x[1]], None])
    assert np.allclose(
        X[0].dirichlet_values.reshape(-1, 2),
        V.node_coordinates[V.dirichlet_dof_global[::2] // 2],
    )


def test_single_field_multi_space(square):
    V = make_fespace(square, 1)
    Y = multi_field([V])
    assert Y.offsets.tolist() == [0, V.num_free_dofs]
    (uh,) = mf_function(Y, np.ones(V.num_free_dofs))
    assert np.all(uh.free_values == 1.0)


def test_multi_field_needs_a_common_model(square, triangles):
    with pytest.raises(ValueError):
        multi_field([])
    with pytest.raises(ValueError):
        multi_field([make_fespace(square, 1), make_fespace(triangles, 1)])
