import numpy as np
import pytest

from lazyfem.arrays import collect
from lazyfem.celldata import CellPoint, Measure, integrate, normal_vector
from lazyfem.errors import MeshValidationError, UnknownTagError, UnsupportedElementError
from lazyfem.fields import ConstantField
from lazyfem.geometry import (
    SIDE_TAGS,
    boundary_triangulation,
    bulk_triangulation,
    cartesian_model,
    cell_geometry,
)
from lazyfem.reffe import CellTopology
from lazyfem.services.domain import channel_model


def test_cartesian_model_of_the_two_by_two_square():
    model = cartesian_model((0, 0), (2, 2), (2, 2))
    assert model.num_nodes == 9
    assert model.num_cells == 4
    assert model.topology is CellTopology.QUAD
    assert model.cells[1].tolist() == [1, 2, 4, 5]
    assert np.allclose(model.node_coordinates[5], [2.0, 1.0])
    assert len(model.tagged_facets("boundary")) == 8
    assert set(SIDE_TAGS[:4]) <= set(model.labels)


def test_single_cell_model_has_four_boundary_facets():
    model = cartesian_model((0, 0), (1, 1), (1, 1))
    assert len(boundary_triangulation(model, "boundary")) == 4
    assert len(bulk_triangulation(model)) == 1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_simplexified_cube_has_six_tets_per_hex(n):
    model = cartesian_model((0, 0, 0), (1, 1, 1), (n, n, n), simplexify=True)
    assert model.topology is CellTopology.TET
    assert model.num_cells == 6 * n**3
    facets = model.facet_cells.row_lengths
    assert np.all((facets == 1) | (facets == 2))
    assert np.array_equal(np.flatnonzero(facets == 1), model.tagged_facets("boundary"))


def test_invalid_cartesian_arguments():
    with pytest.raises(ValueError):
        cartesian_model((0, 0), (1, 1), (0, 2))
    with pytest.raises(ValueError):
        cartesian_model((0, 0), (1, -1), (2, 2))


def test_unknown_tag():
    model = cartesian_model((0,), (1,), (4,))
    with pytest.raises(UnknownTagError):
        boundary_triangulation(model, "inlet")
    with pytest.raises(MeshValidationError):
        model.add_tag("broken", [model.num_facets])


def test_unit_cells_have_identity_jacobian():
    model = cartesian_model((0, 0), (2, 2), (2, 2))
    cell_map, jacobian = cell_geometry(model.bulk)
    points = np.array([[0.0, 0.0], [0.3, 0.7], [1.0, 1.0]])
    for e in range(model.num_cells):
        assert np.allclose(jacobian[e].evaluate(None, points), np.eye(2))
        vertices = cell_map[e].evaluate(None, CellTopology.QUAD.vertices)
        assert np.allclose(vertices, model.node_coordinates[model.cells[e]])


@pytest.mark.parametrize("simplexify", [False, True])
def test_cell_volumes_add_up_to_the_domain(simplexify):
    model = cartesian_model((0.0, -1.0, 2.0), (0.5, 2.0, 1.5), (3, 2, 2), simplexify)
    volume = integrate(1.0, Measure(model.bulk, 2)).sum()
    assert volume == pytest.approx(0.5 * 2.0 * 1.5, abs=1e-10)


def test_affine_simplices_have_constant_jacobians():
    model = cartesian_model((0, 0), (1, 1), (2, 2), simplexify=True)
    assert isinstance(model.bulk.cell_jacobian[0], ConstantField)


def test_boundary_measure_is_the_perimeter():
    model = cartesian_model((0, 0), (2, 1), (4, 3), simplexify=True)
    btri = boundary_triangulation(model, "boundary")
    assert integrate(1.0, Measure(btri, 1)).sum() == pytest.approx(6.0, abs=1e-12)
    assert integrate(1.0, Measure(boundary_triangulation(model, "xmax"), 1)).sum() == pytest.approx(1.0)


def test_normals_of_the_square_point_outward():
    model = cartesian_model((0, 0), (1, 1), (2, 2))
    expected = {"xmin": [-1, 0], "xmax": [1, 0], "ymin": [0, -1], "ymax": [0, 1]}
    for tag, normal in expected.items():
        btri = boundary_triangulation(model, tag)
        values = collect(normal_vector(btri)(CellPoint.reference(btri, [[0.5]])))
        for value in values:
            assert np.allclose(value[0], normal)


@pytest.mark.parametrize("simplexify", [False, True])
def test_normals_point_away_from_the_adjacent_cell(simplexify):
    model = cartesian_model((0, 0, 0), (1, 2, 1), (2, 2, 2), simplexify)
    btri = boundary_triangulation(model, "boundary")
    centroid = btri.topology.centroid[None, :]
    x = CellPoint.reference(btri, centroid)
    normals = collect(normal_vector(btri)(x))
    facet_centers = collect(x.to_physical().points)
    for k, cell in enumerate(btri.cell_ids):
        cell_center = model.node_coordinates[model.cells[cell]].mean(axis=0)
        assert np.dot(normals[k][0], facet_centers[k][0] - cell_center) > 0
        assert np.linalg.norm(normals[k][0]) == pytest.approx(1.0)


def test_channel_outlet_has_one_facet_per_face_cell():
    model = channel_model((2, 3, 4), simplexify=True)
    assert len(model.tagged_facets("outlet")) == 2 * 2 * 3
    assert len(model.tagged_facets("noslip")) == 2 * (2 * 2 * 4)


def test_mixed_topologies_are_rejected_by_geometry():
    from lazyfem.arrays import CompressedArray, JaggedTable
    from lazyfem.geometry import DiscreteModel

    nodes = [[0, 0], [1, 0], [0, 1], [1, 1], [2, 0]]
    cells = JaggedTable.from_rows([[0, 1, 2, 3], [1, 4, 3]])
    model = DiscreteModel(nodes, cells, CompressedArray([CellTopology.QUAD, CellTopology.TRI], [0, 1]))
    with pytest.raises(UnsupportedElementError):
        model.bulk.topology
