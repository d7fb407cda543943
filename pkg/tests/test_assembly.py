import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from lazyfem.arrays import collect
from lazyfem.assembly import (
    SparseMatrixAssembler,
    allocate_pattern,
    assemble_matrix,
    assemble_matrix_and_vector,
    assemble_vector,
    reassemble_in_place,
    write_matrix_coo,
)
from lazyfem.celldata import Measure, integrate
from lazyfem.errors import AssemblyError
from lazyfem.fespaces import fe_basis, make_fespace, trial_space
from lazyfem.fields import gradient
from lazyfem.geometry import cartesian_model
from lazyfem.tensors import dot

SEGMENT = np.array([[1.0, -1.0], [-1.0, 1.0]])


def _laplace(model, order=1, tags=(), g=None, workers=1):
    V = make_fespace(model, order, list(tags))
    U = trial_space(V, g)
    m = Measure(model.bulk, 2 * order)
    v, du = fe_basis(V, "test"), fe_basis(U, "trial")
    a = integrate(dot(gradient(du), gradient(v)), m)
    l = integrate(1.0 * v, m)
    return V, U, a, l, SparseMatrixAssembler(U, V, workers)


def _dense(V, cell_mats):
    out = np.zeros((V.num_free_dofs, V.num_free_dofs))
    for ids, local in zip(V.cell_dof_ids, cell_mats):
        for i, r in enumerate(ids):
            for j, c in enumerate(ids):
                if r >= 0 and c >= 0:
                    out[r, c] += local[i, j]
    return out


def test_plain_cell_arrays():
    plan = allocate_pattern([[0, 1], [1, 2]], [[0, 1], [1, 2]], 3, 3)
    A = assemble_matrix(plan, [SEGMENT, SEGMENT])
    assert plan.nnz == 7
    assert np.allclose(A.toarray(), [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    b = assemble_vector(plan, [np.ones(2), np.ones(2)])
    assert b.tolist() == [1.0, 2.0, 1.0]


def test_constrained_columns_are_lifted():
    plan = allocate_pattern([[-1, 0], [0, 1]], [[-1, 0], [0, 1]], 2, 2)
    A, b = assemble_matrix_and_vector(plan, [SEGMENT, SEGMENT], [np.zeros(2), np.zeros(2)], np.array([2.0]))
    assert np.allclose(A.toarray(), [[2, -1], [-1, 1]])
    assert b.tolist() == [2.0, 0.0]


def test_matches_a_dense_scatter(triangles):
    V, _, a, _, assembler = _laplace(triangles, order=2, tags=["xmin"])
    A = assembler.assemble_matrix(a)
    assert np.allclose(A.toarray(), _dense(V, collect(a[triangles.bulk])), atol=1e-12)
    assert abs(A - A.T).max() < 1e-12


def test_laplacian_annihilates_constants(cube):
    _, _, a, _, assembler = _laplace(cube)
    A = assembler.assemble_matrix(a)
    assert np.allclose(A @ np.ones(A.shape[0]), 0.0, atol=1e-12)


def test_linear_dirichlet_data_is_reproduced(triangles):
    V, U, a, _, assembler = _laplace(triangles, tags=["boundary"], g=lambda x: 2.0 * x[0] - x[1])
    v = fe_basis(V, "test")
    l = integrate(0.0 * v, Measure(triangles.bulk, 2))
    A, b = assembler.assemble_matrix_and_vector(a, l)
    x = spsolve(A.tocsc(), b)
    nodes = V.node_coordinates[V.free_dof_global]
    assert np.allclose(x, 2.0 * nodes[:, 0] - nodes[:, 1], atol=1e-12)


def test_in_place_reassembly_matches_fresh(square):
    _, _, a, l, assembler = _laplace(square, tags=["xmin"], g=1.0)
    plan = assembler.plan(a, l)
    A, b = assembler.assemble_matrix_and_vector(a, l, plan)
    fresh_A, fresh_b = A.copy(), b.copy()
    indices = A.indices
    assembler.reassemble_in_place(plan, A, b, a, l)
    assert A.indices is indices
    assert np.array_equal(A.data, fresh_A.data)
    assert np.array_equal(b, fresh_b)
    assembler.reassemble_in_place(plan, A, b, 2.0 * a, 2.0 * l)
    assert np.allclose(A.data, 2.0 * fresh_A.data)
    assert np.allclose(b, 2.0 * fresh_b)


def test_in_place_rejects_foreign_matrices(square):
    _, _, a, l, assembler = _laplace(square)
    plan = assembler.plan(a, l)
    A, b = assembler.assemble_matrix_and_vector(a, l, plan)
    with pytest.raises(AssemblyError):
        assembler.reassemble_in_place(plan, A.copy(), b, a, l)
    with pytest.raises(AssemblyError):
        assembler.reassemble_in_place(plan, sp.identity(len(b), format="csr"), b, a, l)
    with pytest.raises(AssemblyError):
        reassemble_in_place(plan, A, np.zeros(len(b) + 1), a, l)


def test_bad_cell_arrays():
    with pytest.raises(AssemblyError):
        allocate_pattern([[0, 3]], [[0, 1]], 2, 2)
    with pytest.raises(AssemblyError):
        allocate_pattern([0, 1], [0, 1], 2, 2)
    plan = allocate_pattern([[0, 1]], [[0, 1]], 2, 2)
    with pytest.raises(AssemblyError):
        assemble_matrix(plan, [np.eye(3)])


def test_threads_do_not_change_the_result():
    model = cartesian_model((0, 0), (1, 1), (40, 40))
    _, _, a, l, serial = _laplace(model)
    threaded = SparseMatrixAssembler(serial.trial, serial.test, workers=4)
    A1, b1 = serial.assemble_matrix_and_vector(a, l)
    A4, b4 = threaded.assemble_matrix_and_vector(a, l)
    assert np.array_equal(A1.data, A4.data)
    assert np.array_equal(b1, b4)


def test_write_matrix_coo(tmp_path):
    plan = allocate_pattern([[0, 1], [1, 2]], [[0, 1], [1, 2]], 3, 3)
    A = assemble_matrix(plan, [SEGMENT, 0.5 * SEGMENT])
    path = tmp_path / "A.txt"
    write_matrix_coo(A, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == A.nnz
    entries = {(int(r), int(c)): float(v) for r, c, v in (line.split() for line in lines)}
    assert entries[(1, 1)] == 1.5
    assert entries[(2, 1)] == -0.5
