import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manymeans.numerics import (EvaluationError, RegParam, SeedSpec, gauss_hermite, lambda_to_t,
                                minimize_scalar, std_normal_cdf, std_normal_pdf, t_to_lambda)

mpmath.mp.dps = 50


def erf_series(z):
    """Maclaurin series of erf in 50-digit arithmetic; independent of scipy."""
    z = mpmath.mpf(z)
    total, term, n = mpmath.mpf(0), z, 0
    while True:
        add = term / (2 * n + 1)
        total += add
        if abs(add) < mpmath.mpf(10) ** -45:
            break
        n += 1
        term *= -z * z / n
    return 2 / mpmath.sqrt(mpmath.pi) * total


def phi_ref(x):
    return 0.5 * (1 + erf_series(mpmath.mpf(x) / mpmath.sqrt(2)))


def test_pdf_values():
    assert std_normal_pdf(0.0) == pytest.approx(0.3989422804014327, abs=1e-16)
    assert std_normal_pdf(40.0) == pytest.approx(0.0, abs=1e-300)
    xs = np.linspace(-5, 5, 41)
    np.testing.assert_array_equal(std_normal_pdf(xs), std_normal_pdf(-xs))


def test_cdf_basic():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(-np.inf) == 0.0
    assert std_normal_cdf(np.inf) == 1.0
    xs = np.linspace(-8, 8, 161)
    np.testing.assert_allclose(std_normal_cdf(xs), 1 - std_normal_cdf(-xs), atol=1e-15)


def test_cdf_quantile_by_bisection():
    lo, hi = mpmath.mpf(1.9), mpmath.mpf(2.0)
    for _ in range(80):
        mid = (lo + hi) / 2
        if phi_ref(mid) < mpmath.mpf("0.975"):
            lo = mid
        else:
            hi = mid
    assert float(lo) == pytest.approx(1.959963984540054, abs=1e-14)
    assert std_normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-12)


@pytest.mark.parametrize("x", [-7.5, -3.0, -1.0, -0.2, 0.4, 1.7, 3.3, 6.0])
def test_cdf_against_series(x):
    assert abs(std_normal_cdf(x) - float(phi_ref(x))) <= 1e-12


def test_cdf_derivative_is_pdf():
    xs = np.linspace(-8, 8, 321)
    h = 1e-5
    num = (std_normal_cdf(xs + h) - std_normal_cdf(xs - h)) / (2 * h)
    assert np.max(np.abs(num - std_normal_pdf(xs))) <= 1e-6


class TestRegParam:
    def test_endpoints(self):
        assert RegParam.from_t(0.0).lam == 0.0
        assert math.isinf(RegParam.from_t(1.0).lam)
        assert RegParam.from_lambda(math.inf).t == 1.0
        assert RegParam.from_lambda(0.0).t == 0.0

    @given(st.floats(min_value=0, max_value=1e3, allow_nan=False))
    def test_round_trip_through_t(self, lam):
        back = RegParam.from_t(RegParam.from_lambda(lam).t).lam
        assert back == pytest.approx(lam, rel=1e-12, abs=0)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            RegParam.from_lambda(-1.0)
        with pytest.raises(ValueError):
            RegParam.from_t(1.5)

    def test_vector_maps(self):
        lam = np.array([0.0, 1.0, np.inf])
        np.testing.assert_array_equal(lambda_to_t(lam), [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(t_to_lambda([0.0, 0.5, 1.0]), lam)


class TestMinimizeScalar:
    def test_interior(self):
        lam, v = minimize_scalar(lambda r: (r.t - 0.5) ** 2)
        assert abs(lam.t - 0.5) <= 1e-6
        assert v <= 1e-12

    def test_boundary(self):
        lam, v = minimize_scalar(lambda r: r.t)
        assert lam.t == 0.0 and v == 0.0

    def test_upper_boundary_is_infinite_lambda(self):
        lam, _ = minimize_scalar(lambda r: 1.0 - r.t)
        assert lam.is_infinite

    def test_constant_tie_break(self):
        lam, v = minimize_scalar(lambda r: 3.0)
        assert lam.t == 0.0 and v == 3.0

    def test_vectorized_matches_scalar(self):
        f = lambda r: (r.t - 0.3) ** 2 + 0.1 * r.t
        g = lambda lams: (lambda_to_t(lams) - 0.3) ** 2 + 0.1 * lambda_to_t(lams)
        a, b = minimize_scalar(f), minimize_scalar(g, vectorized=True)
        assert a[0].t == pytest.approx(b[0].t, abs=1e-12)

    def test_non_finite_raises_with_t(self):
        with pytest.raises(EvaluationError) as info:
            minimize_scalar(lambda r: math.nan if r.t > 0.75 else r.t, grid_points=11)
        assert info.value.t == pytest.approx(0.8)

    def test_grid_too_small(self):
        with pytest.raises(ValueError):
            minimize_scalar(lambda r: r.t, grid_points=2)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.0, 1.0), st.floats(0.1, 50.0), st.floats(-1.0, 1.0))
    def test_convex_matches_brute_force(self, c, a, b):
        # f(t) = a (t - c)^2 + b t; compare with a 10^6-point grid.
        f = lambda lam: a * (lambda_to_t(lam) - c) ** 2 + b * lambda_to_t(lam)
        _, v = minimize_scalar(f, vectorized=True)
        ts = np.linspace(0, 1, 1_000_001)
        brute = np.min(a * (ts - c) ** 2 + b * ts)
        assert v <= brute + 1e-6


class TestGaussHermite:
    def test_one_node(self):
        x, w = gauss_hermite(1)
        np.testing.assert_allclose(x, [0.0], atol=0)
        assert w[0] == pytest.approx(math.sqrt(math.pi), abs=1e-15)

    def test_two_nodes(self):
        x, _ = gauss_hermite(2)
        np.testing.assert_allclose(np.sort(x), [-1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-15)

    @pytest.mark.parametrize("n", [2, 5, 20, 64, 128, 256])
    def test_weights_and_moments(self, n):
        x, w = gauss_hermite(n)
        assert abs(w.sum() - math.sqrt(math.pi)) <= 1e-12
        np.testing.assert_array_equal(x, -x[::-1])
        # Var of N(0,1) through the rule.
        assert np.dot(w, (math.sqrt(2) * x) ** 2) / math.sqrt(math.pi) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", [0, 257])
    def test_range(self, n):
        with pytest.raises(ValueError):
            gauss_hermite(n)


class TestSeedSpec:
    def test_deterministic(self):
        a = SeedSpec(7, 3).rng().standard_normal(100)
        b = SeedSpec(7, 3).rng().standard_normal(100)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ_and_are_uncorrelated(self):
        a = SeedSpec(7, 1).rng().standard_normal(20_000)
        b = SeedSpec(7, 2).rng().standard_normal(20_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(20_000)

    def test_child_is_order_independent(self):
        base = SeedSpec(11)
        forward = [base.child(c, r).stream_id for c in range(3) for r in range(3)]
        backward = [base.child(c, r).stream_id for c in reversed(range(3)) for r in reversed(range(3))]
        assert forward == list(reversed(backward))
        assert len(set(forward)) == 9

    def test_range(self):
        with pytest.raises(ValueError):
            SeedSpec(-1)
        with pytest.raises(ValueError):
            SeedSpec(2**64)
