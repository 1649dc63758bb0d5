import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from compact_sde import dual
from compact_sde.dual import Dual

finite = st.floats(-3.0, 3.0, allow_nan=False)


def _fd(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


class TestArithmetic:
    def test_constant_has_zero_tangent(self):
        d = Dual(np.array([1.0, 2.0]))
        np.testing.assert_array_equal(d.tangent, 0.0)

    @given(finite, finite)
    def test_product_rule(self, a, b):
        x = Dual(np.array(a), np.array(1.0))
        y = (x * x) * (x + b)
        expected = 3 * a * a + 2 * a * b
        np.testing.assert_allclose(y.tangent, expected, rtol=1e-12, atol=1e-12)

    @given(st.floats(0.5, 3.0))
    def test_quotient_rule(self, a):
        x = Dual(np.array(a), np.array(1.0))
        y = 1.0 / x + x / (x + 1.0)
        np.testing.assert_allclose(y.tangent, -1 / a ** 2 + 1 / (a + 1) ** 2, rtol=1e-12)

    def test_reflected_operators_with_arrays(self):
        x = dual.seed_direction(np.array([0.5, 2.0]), np.array([1.0, 0.0]))
        y = np.array([3.0, 4.0]) - x
        np.testing.assert_array_equal(y.value, [2.5, 2.0])
        np.testing.assert_array_equal(y.tangent, [-1.0, 0.0])

    def test_power(self):
        x = Dual(np.array(2.0), np.array(1.0))
        assert (x ** 3).tangent == 12.0
        assert (x ** 0).tangent == 0.0

    def test_matmul_with_constant(self):
        W = np.array([[1.0, 2.0], [3.0, 4.0]])
        x = Dual(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        y = x @ W.T
        np.testing.assert_array_equal(y.tangent, W[:, 0])

    def test_sum_broadcasts_scalar_tangent(self):
        x = Dual(np.ones((3, 2)), np.array(1.0))
        np.testing.assert_array_equal(x.sum(axis=-1).tangent, [2.0, 2.0, 2.0])


class TestElementary:
    @pytest.mark.parametrize("name", ["exp", "expm1", "tanh", "sin", "cos", "sigmoid",
                                      "softplus", "celu", "selu", "gelu", "silu"])
    def test_matches_finite_differences(self, name):
        f = getattr(dual, name)
        # an even count keeps 0 off the grid, where SELU has a kink
        x = np.linspace(-2.5, 2.5, 40)
        out = f(Dual(x, np.ones_like(x)))
        np.testing.assert_allclose(out.value, f(x), rtol=1e-15)
        np.testing.assert_allclose(out.tangent, _fd(f, x), atol=1e-6)

    @pytest.mark.parametrize("name", ["log", "log1p", "sqrt", "logit"])
    def test_positive_domain(self, name):
        f = getattr(dual, name)
        x = np.linspace(0.05, 0.95, 19)
        np.testing.assert_allclose(f(Dual(x, np.ones_like(x))).tangent, _fd(f, x), atol=1e-6)

    def test_celu_hand_values(self):
        x = np.array([-1.0, 0.0, 2.0])
        np.testing.assert_allclose(dual.celu(x), [np.exp(-1.0) - 1.0, 0.0, 2.0], rtol=1e-15)

    def test_selu_one_sided_slopes_at_zero(self):
        left = dual.selu(Dual(np.array(-1e-300), np.array(1.0))).tangent
        right = dual.selu(Dual(np.array(1e-300), np.array(1.0))).tangent
        np.testing.assert_allclose([left, right], [1.0507009873554805 * 1.6732632423543772, 1.0507009873554805])

    def test_selu_constants(self):
        np.testing.assert_allclose(dual.selu(np.array([1.0, -1.0])),
                                   [1.0507009873554805, 1.0507009873554805 * 1.6732632423543772 * (np.exp(-1) - 1)],
                                   rtol=1e-14)

    def test_sqrt_at_zero_has_finite_tangent(self):
        out = dual.sqrt(Dual(np.array([0.0, 4.0]), np.ones(2)))
        np.testing.assert_array_equal(out.tangent, [0.0, 0.25])

    def test_clamp_drops_tangent_where_clamped(self):
        out = dual.clamp_min(Dual(np.array([-1.0, 1.0]), np.ones(2)), 0.0)
        np.testing.assert_array_equal(out.value, [0.0, 1.0])
        np.testing.assert_array_equal(out.tangent, [0.0, 1.0])


class TestReductions:
    @settings(max_examples=50)
    @given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=2, max_size=6))
    def test_prod_tangent_matches_finite_differences(self, vals):
        x = np.array(vals)
        direction = np.linspace(1.0, -1.0, len(x))
        out = dual.prod(Dual(x, direction), axis=-1)
        fd = _fd(lambda h: np.prod(x + h * direction), 0.0)
        np.testing.assert_allclose(out.tangent, fd, atol=1e-6)

    def test_prod_with_zero_entry(self):
        out = dual.prod(Dual(np.array([0.0, 2.0, 3.0]), np.array([1.0, 0.0, 0.0])), axis=-1)
        assert out.value == 0.0
        assert out.tangent == 6.0

    def test_softmin_sums_to_one_and_handles_large_inputs(self):
        w = dual.softmin(np.array([1000.0, 1001.0, 1e6]))
        np.testing.assert_allclose(w.sum(), 1.0, rtol=1e-15)
        assert w[0] > w[1] > w[2] >= 0.0

    def test_logaddexp_tangent(self):
        a = Dual(np.array(0.3), np.array(1.0))
        out = dual.logaddexp(a * 2.0, -a)
        fd = _fd(lambda x: np.logaddexp(2 * x, -x), 0.3)
        np.testing.assert_allclose(out.tangent, fd, atol=1e-8)

    def test_norm_tangent(self):
        x = Dual(np.array([3.0, 4.0]), np.array([1.0, 0.0]))
        np.testing.assert_allclose(dual.norm(x).tangent, 0.6, rtol=1e-15)
