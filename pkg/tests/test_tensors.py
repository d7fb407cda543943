import numpy as np
import pytest

from lazyfem import tensors
from lazyfem.errors import ShapeError, SingularJacobianError
from lazyfem.tensors import TensorValue, VectorValue, det, dot, inner, inv, norm, outer, tr, transpose


def test_value_constructors():
    assert VectorValue(1, 2, 3).tolist() == [1.0, 2.0, 3.0]
    assert TensorValue([1, 2], [3, 4]).shape == (2, 2)
    with pytest.raises(ShapeError):
        VectorValue(1, 2, 3, 4)


def test_products_of_small_values():
    u = VectorValue(1, 2, 3)
    v = VectorValue(4, 5, 6)
    a = TensorValue([1, 2], [3, 4])
    assert dot(u, v) == 32.0
    assert inner(u, v) == 32.0
    assert outer(u, v)[1, 2] == 12.0
    assert dot(a, VectorValue(1, 1)).tolist() == [3.0, 7.0]
    assert dot(VectorValue(1, 1), a).tolist() == [4.0, 6.0]
    assert inner(a, a) == 30.0
    assert tr(a) == 5.0
    assert transpose(a)[0, 1] == 3.0
    assert norm(VectorValue(3, 4)) == 5.0


@pytest.mark.parametrize("size", [1, 2, 3])
def test_det_and_inv_match_numpy(rng, size):
    a = rng.standard_normal((size, size)) + 3 * np.eye(size)
    assert det(a) == pytest.approx(np.linalg.det(a), rel=1e-12)
    assert np.allclose(inv(a), np.linalg.inv(a), atol=1e-12)


def test_batched_kernels_keep_leading_axes(rng):
    a = rng.standard_normal((5, 3, 3)) + 4 * np.eye(3)
    b = rng.standard_normal((5, 3))
    assert det(a, nbatch=1).shape == (5,)
    assert np.allclose(dot(a, b, nbatch=1), np.einsum("nij,nj->ni", a, b))
    assert np.allclose(inv(a, nbatch=1) @ a, np.eye(3), atol=1e-12)
    assert norm(b, nbatch=1).shape == (5,)


def test_invalid_shapes_are_rejected():
    with pytest.raises(ShapeError):
        tensors.add(VectorValue(1, 2), TensorValue([1, 2], [3, 4]))
    with pytest.raises(ShapeError):
        tr(VectorValue(1, 2))
    with pytest.raises(ShapeError):
        tensors.div(VectorValue(1, 2), VectorValue(1, 2))


def test_singular_matrix_raises():
    with pytest.raises(SingularJacobianError):
        inv(TensorValue([1, 2], [2, 4]))
