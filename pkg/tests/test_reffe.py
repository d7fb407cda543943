import math

import numpy as np
import pytest

from lazyfem.errors import UnsupportedElementError
from lazyfem.quadrature import MAX_DEGREE, make_quadrature
from lazyfem.reffe import CellTopology, lattice, make_reference_fe

TOPOLOGIES = [CellTopology.SEG, CellTopology.TRI, CellTopology.QUAD, CellTopology.TET, CellTopology.HEX]


def _tolerance(order):
    return 1e-12 if order <= 2 else 1e-8


@pytest.mark.parametrize("topology", TOPOLOGIES)
@pytest.mark.parametrize("order", [1, 2, 3, 4])
@pytest.mark.parametrize("vector", [False, True])
def test_shape_functions_are_dual_to_dofs(topology, order, vector, rng):
    value_shape = (topology.dim,) if vector else ()
    reffe = make_reference_fe(topology, order, value_shape)
    duality = reffe.dof_basis.evaluate(reffe.shapes)
    assert duality.shape == (reffe.num_dofs, reffe.num_dofs)
    assert np.max(np.abs(duality - np.eye(reffe.num_dofs))) < _tolerance(order)

    points = rng.random((100, topology.dim))
    if topology.is_simplex:
        points = points[points.sum(axis=1) <= 1.0]
    total = reffe.shapes.evaluate(None, points).sum(axis=1)
    assert np.max(np.abs(total - 1.0)) < _tolerance(order)


@pytest.mark.parametrize(
    "topology, order, nodes",
    [
        (CellTopology.SEG, 3, 4),
        (CellTopology.TRI, 2, 6),
        (CellTopology.QUAD, 2, 9),
        (CellTopology.TET, 2, 10),
        (CellTopology.HEX, 2, 27),
        (CellTopology.TET, 4, 35),
    ],
)
def test_node_counts(topology, order, nodes):
    reffe = make_reference_fe(topology, order)
    assert reffe.num_nodes == nodes
    assert len(lattice(topology, order)) == nodes


def test_vertex_nodes_come_first_in_vertex_order():
    reffe = make_reference_fe(CellTopology.TET, 2)
    assert np.allclose(reffe.node_coordinates[:4], CellTopology.TET.vertices)
    assert reffe.node_owners[:4] == [(0, v) for v in range(4)]
    assert all(owner[0] == 1 for owner in reffe.node_owners[4:])


def test_vector_dofs_are_node_major():
    reffe = make_reference_fe("TRI", 1, 2)
    assert reffe.num_dofs == 6
    assert reffe.dof_to_node.tolist() == [0, 0, 1, 1, 2, 2]
    assert reffe.dof_to_component.tolist() == [0, 1, 0, 1, 0, 1]


def test_reference_elements_are_shared():
    assert make_reference_fe("HEX", 2) is make_reference_fe(CellTopology.HEX, 2)


def test_unsupported_elements():
    with pytest.raises(UnsupportedElementError):
        make_reference_fe("PYRAMID", 1)
    with pytest.raises(UnsupportedElementError):
        make_reference_fe("TRI", 5)
    with pytest.raises(UnsupportedElementError):
        make_reference_fe("TRI", 1, (2, 2))


def _exact_monomial(topology, exponents):
    if topology.is_simplex:
        return math.prod(math.factorial(e) for e in exponents) / math.factorial(sum(exponents) + topology.dim)
    return math.prod(1.0 / (e + 1) for e in exponents)


@pytest.mark.parametrize("topology", TOPOLOGIES)
@pytest.mark.parametrize("degree", [0, 1, 2, 4, 7])
def test_quadrature_is_exact_up_to_its_degree(topology, degree):
    quad = make_quadrature(topology, degree)
    assert quad.weights.sum() == pytest.approx(topology.measure, rel=1e-13)
    dim = topology.dim
    for exponents in np.ndindex(*(degree + 1,) * dim):
        if topology.is_simplex and sum(exponents) > degree:
            continue
        values = np.prod(quad.points ** np.array(exponents), axis=1)
        assert quad.weights @ values == pytest.approx(_exact_monomial(topology, exponents), rel=1e-12, abs=1e-15)


def test_quadrature_rules_are_cached_and_bounded():
    assert make_quadrature("TET", 4).points is make_quadrature(CellTopology.TET, 4).points
    assert make_quadrature("QUAD", MAX_DEGREE).num_points == 21 ** 2
    with pytest.raises(UnsupportedElementError):
        make_quadrature("TRI", MAX_DEGREE + 1)
