import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.laguerre import laggauss
from scipy import special

from satnoma.errors import ConvergenceError
from satnoma.specfun import (
    SeriesControl,
    bessel_j,
    gauss_laguerre_rule,
    kummer_1f1,
    log_gamma,
    lower_incomplete_gamma,
    pochhammer,
    regularized_lower_gamma,
)

# Frozen from 30-digit mpmath evaluations.
LNGAMMA_0739 = 0.21538039332453573445
LOWER_GAMMA_0739_1 = 0.92363329728501472452
J1_AT_1 = 0.44005058574493351596
F11_2_1_HALF = 2.4730819060501922203


def bessel_series(order, u, terms=80):
    # Ascending series in 50-digit arithmetic; the float version cancels badly past u ~ 10.
    with mp.workdps(50):
        h = mp.mpf(u) / 2
        total = mp.fsum(
            (-1) ** k * h ** (2 * k + order) / (mp.factorial(k) * mp.factorial(k + order))
            for k in range(terms)
        )
        return float(total)


class TestSeriesControl:
    def test_defaults(self):
        ctl = SeriesControl()
        assert ctl.rel_tol == 1e-12
        assert ctl.max_terms == 500

    @pytest.mark.parametrize("kw", [{"rel_tol": 0.0}, {"rel_tol": 1.0}, {"max_terms": 0}])
    def test_rejects_bad(self, kw):
        with pytest.raises(ValueError):
            SeriesControl(**kw)


class TestLogGamma:
    @pytest.mark.parametrize("x", [1.0, 2.0])
    def test_trivial(self, x):
        assert log_gamma(x) == 0.0

    def test_oracle(self):
        assert log_gamma(0.739) == pytest.approx(LNGAMMA_0739, rel=1e-14)

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            log_gamma(x)

    @settings(max_examples=300)
    @given(st.floats(0.1, 200.0))
    def test_exp_relative_error(self, x):
        with mp.workdps(40):
            err = mp.expm1(mp.mpf(log_gamma(x)) - mp.loggamma(mp.mpf(x)))
        assert abs(float(err)) <= 1e-13

    @pytest.mark.parametrize("x", [9.999999, 10.0, 10.000001])
    def test_branch_seam(self, x):
        assert log_gamma(x) == pytest.approx(math.lgamma(x), rel=1e-14)


class TestPochhammer:
    def test_values(self):
        assert pochhammer(0.739, 0) == 1.0
        assert pochhammer(1.0, 3) == 6.0
        assert pochhammer(0.739, 2) == pytest.approx(0.739 * 1.739, rel=1e-15)

    @given(st.floats(0.05, 30.0), st.integers(0, 120))
    def test_gamma_ratio(self, m, k):
        expected = special.poch(m, k)
        assert pochhammer(m, k) == pytest.approx(expected, rel=1e-11)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            pochhammer(0.0, 2)


class TestIncompleteGamma:
    def test_trivial(self):
        assert lower_incomplete_gamma(2.0, 0.0) == 0.0
        assert lower_incomplete_gamma(1.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)

    def test_oracle(self):
        assert lower_incomplete_gamma(0.739, 1.0) == pytest.approx(LOWER_GAMMA_0739_1, rel=1e-13)

    @pytest.mark.parametrize("a,x", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5)])
    def test_domain(self, a, x):
        with pytest.raises(ValueError):
            lower_incomplete_gamma(a, x)

    def test_vectorized(self):
        x = np.linspace(0, 40, 101)
        got = regularized_lower_gamma(3.5, x)
        np.testing.assert_allclose(got, special.gammainc(3.5, x), rtol=1e-12, atol=1e-300)

    @settings(max_examples=200)
    @given(st.floats(0.05, 60.0), st.floats(0.0, 150.0))
    def test_against_scipy(self, a, x):
        assert regularized_lower_gamma(a, x) == pytest.approx(special.gammainc(a, x), rel=1e-12, abs=1e-300)

    @given(st.floats(0.1, 40.0), st.floats(0.01, 80.0))
    def test_recurrence(self, a, x):
        # P(a+1, x) = P(a, x) - x^a e^-x / Gamma(a+1)
        step = math.exp(a * math.log(x) - x - math.lgamma(a + 1))
        lhs = regularized_lower_gamma(a + 1, x)
        rhs = regularized_lower_gamma(a, x) - step
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-13)

    @given(st.floats(0.1, 20.0), st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    def test_monotone_and_bounded(self, a, x1, x2):
        lo, hi = sorted((x1, x2))
        g_lo, g_hi = lower_incomplete_gamma(a, lo), lower_incomplete_gamma(a, hi)
        assert g_lo <= g_hi * (1 + 1e-13)
        assert g_hi <= math.gamma(a) * (1 + 1e-13)


class TestKummer:
    def test_trivial(self):
        assert kummer_1f1(10.1, 1.0, 0.0) == 1.0
        assert kummer_1f1(1.0, 1.0, 1.0) == pytest.approx(math.e, rel=1e-13)

    def test_oracle_and_kummer_identity(self):
        v = kummer_1f1(2.0, 1.0, 0.5)
        assert v == pytest.approx(F11_2_1_HALF, rel=1e-13)
        assert v == pytest.approx(math.exp(0.5) * 1.5, rel=1e-13)

    @given(st.floats(0.0, 30.0))
    def test_exponential_identity(self, z):
        assert kummer_1f1(1.0, 1.0, z) == pytest.approx(math.exp(z), rel=1e-11)

    @given(st.floats(0.1, 20.0), st.floats(0.0, 20.0))
    def test_against_scipy(self, a, z):
        assert kummer_1f1(a, 1.0, z) == pytest.approx(special.hyp1f1(a, 1.0, z), rel=1e-10)

    @given(st.floats(0.1, 20.0), st.floats(0.0, 20.0))
    def test_at_least_one(self, a, z):
        assert kummer_1f1(a, 1.0, z) >= 1.0

    def test_cap_is_reported(self):
        with pytest.raises(ConvergenceError):
            kummer_1f1(1.0, 1.0, 50.0, SeriesControl(max_terms=10))

    @pytest.mark.parametrize("b", [0.0, -2.0])
    def test_bad_b(self, b):
        with pytest.raises(ValueError):
            kummer_1f1(1.0, b, 1.0)


class TestBessel:
    def test_zero(self):
        assert bessel_j(1, 0.0) == 0.0
        assert bessel_j(3, 0.0) == 0.0

    def test_oracle(self):
        assert bessel_j(1, 1.0) == pytest.approx(J1_AT_1, abs=1e-15)

    @pytest.mark.parametrize("order", [1, 3])
    @pytest.mark.parametrize("u", [0.01, 0.5, 1.0, 2.07123, 5.0, 12.0, 20.0])
    def test_series_agreement(self, order, u):
        assert bessel_j(order, u) == pytest.approx(bessel_series(order, u), abs=1e-10)

    @pytest.mark.parametrize("order", [0, 2, 4])
    def test_unsupported_order(self, order):
        with pytest.raises(ValueError):
            bessel_j(order, 1.0)


class TestGaussLaguerre:
    def test_single_point(self):
        x, w = gauss_laguerre_rule(1)
        assert x.tolist() == [1.0] and w.tolist() == [1.0]

    @pytest.mark.parametrize("n", [0, 129])
    def test_range(self, n):
        with pytest.raises(ValueError):
            gauss_laguerre_rule(n)

    @pytest.mark.parametrize("n", [2, 5, 16, 64])
    def test_matches_numpy(self, n):
        x, w = gauss_laguerre_rule(n)
        xr, wr = laggauss(n)
        np.testing.assert_allclose(x, xr, rtol=1e-12)
        np.testing.assert_allclose(w, wr, rtol=1e-9, atol=1e-300)

    @pytest.mark.parametrize("n", [2, 4, 8, 16, 32, 64, 128])
    def test_polynomial_exactness(self, n):
        # Integral of x^k e^-x on [0, inf) is k!. Test degrees up to 2n-1 while k! is representable.
        x, w = gauss_laguerre_rule(n)
        for k in range(min(2 * n, 40)):
            got = math.fsum(w * x**k)
            assert got == pytest.approx(math.factorial(k), rel=1e-10), k

    def test_positive_sorted_cached(self):
        x, w = gauss_laguerre_rule(32)
        assert np.all(x > 0) and np.all(w > 0) and np.all(np.diff(x) > 0)
        assert gauss_laguerre_rule(32)[0] is x
        with pytest.raises(ValueError):
            x[0] = 1.0
