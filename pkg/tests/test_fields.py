import numpy as np
import pytest

from lazyfem.fields import (
    ConstantField,
    DualArray,
    GenericField,
    compose,
    divergence,
    gradient,
    linear_combination,
    monomial_basis,
    monomial_exponents,
    operate_fields,
)
from lazyfem.tensors import det, dot, inv, norm, outer, tr, transpose


def _points(rng, n=7, dim=2):
    return rng.random((n, dim))


def test_generic_field_receives_coordinates_component_first(rng):
    xs = _points(rng)
    f = GenericField(lambda x: x[0] + 2 * x[1])
    assert np.allclose(f.evaluate(None, xs), xs[:, 0] + 2 * xs[:, 1])
    assert f.evaluate(None, np.array([1.0, 1.0])) == pytest.approx(3.0)


def test_vector_and_tensor_results_are_stacked(rng):
    xs = _points(rng)
    v = GenericField(lambda x: [x[0], x[1] ** 2])
    t = GenericField(lambda x: [[x[0], 0 * x[0]], [x[1], 1 + 0 * x[0]]])
    assert v.evaluate(None, xs).shape == (7, 2)
    values = t.evaluate(None, xs)
    assert values.shape == (7, 2, 2)
    assert np.allclose(values[:, 1, 0], xs[:, 1])


def test_automatic_gradient_matches_analytic(rng):
    xs = _points(rng, dim=3)
    f = GenericField(lambda x: np.sin(x[0]) * x[1] ** 2 + np.exp(x[2]))
    g = gradient(f).evaluate(None, xs)
    expected = np.stack([np.cos(xs[:, 0]) * xs[:, 1] ** 2, 2 * np.sin(xs[:, 0]) * xs[:, 1], np.exp(xs[:, 2])], axis=1)
    assert np.allclose(g, expected, atol=1e-12)


def test_vector_gradient_follows_transposed_convention(rng):
    xs = _points(rng)
    u = GenericField(lambda x: [x[0] * x[1], 3 * x[1]])
    g = gradient(u).evaluate(None, xs)
    # g[:, i, j] = d u_j / d x_i
    assert np.allclose(g[:, 0, 0], xs[:, 1])
    assert np.allclose(g[:, 1, 0], xs[:, 0])
    assert np.allclose(g[:, 0, 1], 0.0)
    assert np.allclose(g[:, 1, 1], 3.0)
    assert np.allclose(divergence(u).evaluate(None, xs), xs[:, 1] + 3.0)


def test_dual_numbers_follow_the_chain_rule():
    x = DualArray(np.array([0.5, 2.0]), np.array([[1.0, 1.0]]))
    y = np.sqrt(x) * np.log(x) / (1 + x ** 2)
    value = x.value
    expected = (0.5 / np.sqrt(value) * np.log(value) + np.sqrt(value) / value) / (1 + value ** 2) - (
        np.sqrt(value) * np.log(value) * 2 * value / (1 + value ** 2) ** 2
    )
    assert np.allclose(y.partials[0], expected)


def test_field_arithmetic_and_product_rule(rng):
    xs = _points(rng)
    f = GenericField(lambda x: x[0] ** 2, lambda x: [2 * x[0], 0 * x[0]])
    g = GenericField(lambda x: x[1], lambda x: [0 * x[0], 1 + 0 * x[0]])
    h = f * g + 3.0
    assert np.allclose(h.evaluate(None, xs), xs[:, 0] ** 2 * xs[:, 1] + 3.0)
    grad = gradient(h).evaluate(None, xs)
    assert np.allclose(grad[:, 0], 2 * xs[:, 0] * xs[:, 1])
    assert np.allclose(grad[:, 1], xs[:, 0] ** 2)
    w = GenericField(lambda x: [x[0], x[1]])
    assert np.allclose(dot(w, w).evaluate(None, xs), np.sum(xs ** 2, axis=1))


def test_composition_chain_rule(rng):
    xs = _points(rng)
    shift = GenericField(lambda x: [2 * x[0], x[0] + x[1]], lambda x: [[2 + 0 * x[0], 1 + 0 * x[0]], [0 * x[0], 1 + 0 * x[0]]])
    f = GenericField(lambda y: y[0] * y[1])
    composed = compose(f, shift)
    a, b = 2 * xs[:, 0], xs[:, 0] + xs[:, 1]
    assert np.allclose(composed.evaluate(None, xs), a * b)
    g = gradient(composed).evaluate(None, xs)
    assert np.allclose(g[:, 0], 2 * b + a)
    assert np.allclose(g[:, 1], a)


def test_constant_field_has_zero_gradient(rng):
    xs = _points(rng)
    c = ConstantField([1.0, 2.0])
    assert c.evaluate(None, xs).shape == (7, 2)
    assert np.all(gradient(c).evaluate(None, xs) == 0.0)


def test_monomial_bases(rng):
    assert len(monomial_exponents(2, 2, "P")) == 6
    assert len(monomial_exponents(2, 2, "Q")) == 9
    assert len(monomial_exponents(3, 1, "P")) == 4
    basis = monomial_basis(2, 1, "Q")
    xs = _points(rng)
    values = basis.evaluate(None, xs)
    assert values.shape == (7, 4)
    assert np.allclose(values[:, 0], 1.0)
    vector = monomial_basis(2, 1, "P", (2,))
    assert vector.evaluate(None, xs).shape == (7, 6, 2)
    assert gradient(vector).evaluate(None, xs).shape == (7, 6, 2, 2)


def test_linear_combination_of_basis(rng):
    xs = _points(rng)
    basis = monomial_basis(2, 1, "P")
    f = linear_combination(np.array([1.0, 2.0, 3.0]), basis)
    values = basis.evaluate(None, xs) @ np.array([1.0, 2.0, 3.0])
    assert np.allclose(f.evaluate(None, xs), values)
    g = gradient(f).evaluate(None, xs)
    assert g.shape == (7, 2)
    assert np.allclose(g[0], g[-1])


def test_gradient_of_dot_and_quotient(rng):
    xs = _points(rng)
    w = GenericField(lambda x: [x[0], x[1]])
    assert np.allclose(gradient(dot(w, w)).evaluate(None, xs), 2 * xs)
    f = GenericField(lambda x: x[0] ** 2)
    g = GenericField(lambda x: 1 + x[1])
    q = gradient(f / g).evaluate(None, xs)
    assert np.allclose(q[:, 0], 2 * xs[:, 0] / (1 + xs[:, 1]))
    assert np.allclose(q[:, 1], -xs[:, 0] ** 2 / (1 + xs[:, 1]) ** 2)


_W = GenericField(lambda x: [x[0], x[1]])
_A = GenericField(lambda x: [[x[0] * x[1], x[0]], [x[1] ** 2, 2 + x[0]]])


def _det_a(x):
    return x[0] * x[1] * (2 + x[0]) - x[0] * x[1] ** 2


@pytest.mark.parametrize(
    "make, expanded",
    [
        (lambda: outer(_W, _W), lambda x: [[x[0] * x[0], x[0] * x[1]], [x[1] * x[0], x[1] * x[1]]]),
        (lambda: norm(_W), lambda x: np.sqrt(x[0] ** 2 + x[1] ** 2)),
        (lambda: tr(transpose(_A)), lambda x: x[0] * x[1] + 2 + x[0]),
        (lambda: det(_A), _det_a),
        (
            lambda: inv(_A),
            lambda x: [
                [(2 + x[0]) / _det_a(x), -1.0 * x[0] / _det_a(x)],
                [-1.0 * x[1] ** 2 / _det_a(x), x[0] * x[1] / _det_a(x)],
            ],
        ),
        (lambda: _A * _W, lambda x: [x[0] * x[1] * x[0] + x[0] * x[1], x[1] ** 2 * x[0] + (2 + x[0]) * x[1]]),
    ],
)
def test_operation_gradients_match_dual_numbers(rng, make, expanded):
    xs = _points(rng)
    f = make()
    reference = GenericField(expanded)
    assert np.allclose(f.evaluate(None, xs), reference.evaluate(None, xs))
    assert np.allclose(gradient(f).evaluate(None, xs), gradient(reference).evaluate(None, xs))


def test_divergence_of_a_scaled_vector_field(rng):
    xs = _points(rng)
    s = GenericField(lambda x: x[0] * x[1])
    w = GenericField(lambda x: [x[0] ** 2, x[1]])
    x0, x1 = xs[:, 0], xs[:, 1]
    assert np.allclose(divergence(s * w).evaluate(None, xs), 3 * x0 ** 2 * x1 + 2 * x0 * x1)
    assert np.allclose(divergence(w - 2.0 * w).evaluate(None, xs), -(2 * x0 + 1))


def test_gradient_of_a_basis_times_a_field(rng):
    xs = _points(rng)
    basis = monomial_basis(2, 1)
    s = GenericField(lambda x: x[0] + x[1] ** 2)
    product = gradient(basis * s).evaluate(None, xs)
    values, grads = basis.evaluate(None, xs), gradient(basis).evaluate(None, xs)
    sv, sg = s.evaluate(None, xs), gradient(s).evaluate(None, xs)
    assert product.shape == grads.shape
    assert np.allclose(product, grads * sv[:, None, None] + values[:, :, None] * sg[:, None, :])


def test_user_operations_have_no_gradient():
    f = operate_fields(np.maximum, GenericField(lambda x: x[0]), 0.5)
    with pytest.raises(NotImplementedError):
        gradient(f)
