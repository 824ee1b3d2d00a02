import pickle

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from satnoma.channel import preset
from satnoma.errors import ValidationError
from satnoma.linkbudget import LinkGeometry
from satnoma.noma import (
    NomaScenario,
    SicMode,
    UserConfig,
    gamma_threshold,
    reference_scenario,
    psi,
    psi_star,
    sinr_detect,
    vartheta_star,
)

# Frozen from 30-digit mpmath evaluations of the boresight-normalised setup.
PSI3_STAR_30DB = 0.010212110934662244261
VARTHETA2_STAR = 1.1796561014367385313
MARGINS = (0.464113268732, 0.358578643763)
SINR_2_1 = 0.83039772603648332127


def users(allocs, rates):
    return [UserConfig(a, r) for a, r in zip(allocs, rates)]


class TestThreshold:
    def test_values(self):
        assert gamma_threshold(0.0) == 0.0
        assert gamma_threshold(1.0) == 1.0
        assert gamma_threshold(0.5) == pytest.approx(np.sqrt(2) - 1, rel=1e-15)

    def test_negative(self):
        with pytest.raises(ValueError):
            gamma_threshold(-0.1)

    @given(st.floats(0, 10), st.floats(0, 10))
    def test_monotone(self, r1, r2):
        lo, hi = sorted((r1, r2))
        assert gamma_threshold(lo) <= gamma_threshold(hi)


class TestSicMode:
    def test_factories(self):
        assert not SicMode.psic().is_imperfect
        m = SicMode.ipsic_db(-30)
        assert m.is_imperfect and m.omega_i == pytest.approx(1e-3)

    @pytest.mark.parametrize("args", [("ipsic", 0.0), ("psic", 0.1), ("bogus", 0.0)])
    def test_invalid(self, args):
        with pytest.raises(ValidationError):
            SicMode(*args)

    def test_residual_factor(self):
        assert SicMode.psic().residual_factor(2) == 0.0
        assert SicMode.ipsic(1e-3).residual_factor(1) == 1.0
        assert SicMode.ipsic(1e-3, exempt_first_user=True).residual_factor(1) == 0.0
        assert SicMode.ipsic(1e-3, exempt_first_user=True).residual_factor(2) == 1.0


class TestScenarioValidation:
    def test_reference_scenario(self, fhs_psic):
        assert fhs_psic.M == 3
        np.testing.assert_allclose(fhs_psic.feasibility_margins[:2], MARGINS, rtol=1e-11)
        assert fhs_psic.feasibility_margins[2] == pytest.approx(0.1)
        np.testing.assert_allclose(fhs_psic.tail_allocs, [0.5, 0.1, 0.0], atol=1e-16)

    @pytest.mark.parametrize("allocs,rates,fragment", [
        ((1.0,), (0.1,), "at least 2"),
        ((0.5, 0.4), (0.1, 0.5), "sum to 1"),
        ((0.4, 0.6), (0.1, 0.5), "non-increasing"),
        ((1.0, 0.0), (0.1, 0.5), "positive power"),
        ((0.6, 0.4), (0.0, 0.5), "target rate"),
        ((0.6, 0.4), (1.6, 0.5), "infeasible allocation for user 1"),
    ])
    def test_rejects(self, allocs, rates, fragment):
        with pytest.raises(ValidationError, match=fragment):
            NomaScenario(users(allocs, rates))

    def test_bad_reference(self):
        with pytest.raises(ValidationError):
            NomaScenario(users((0.6, 0.4), (0.1, 0.5)), gain_reference="relative")

    def test_unvalidated_skips_checks(self):
        s = NomaScenario.unvalidated(users((0.4, 0.6), (0.1, 0.5)))
        assert s.M == 2

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5), st.floats(0.05, 2.0))
    def test_accepted_scenarios_are_feasible(self, raw, rate):
        a = sorted((x / sum(raw) for x in raw), reverse=True)
        a[-1] = 1.0 - sum(a[:-1])
        try:
            s = NomaScenario(users(a, [rate] * len(a)))
        except ValidationError:
            return
        assert np.all(s.feasibility_margins > 0)
        assert np.all(np.diff(s.allocs) <= 0)

    def test_gain_reference(self):
        s_abs = reference_scenario(gain_reference="absolute")
        s_bor = reference_scenario()
        assert s_abs.gain_scale == 1.0
        np.testing.assert_allclose(s_bor.gains * s_bor.gain_scale, s_abs.gains, rtol=1e-15)
        assert np.all(s_bor.gains <= 1.0)

    def test_with_helpers(self, fhs_psic):
        s = fhs_psic.with_angles((0.1, 0.2, 0.3))
        assert s.gains[0] > s.gains[1] > s.gains[2]
        assert s.with_fading(preset("as")).fading(2) == preset("as")
        assert fhs_psic.homogeneous_fading
        with pytest.raises(ValidationError):
            fhs_psic.with_angles((0.1,))

    def test_pickle_round_trip(self, fhs_ipsic):
        s2 = pickle.loads(pickle.dumps(fhs_ipsic))
        assert s2 == fhs_ipsic
        np.testing.assert_array_equal(s2.gains, fhs_ipsic.gains)

    @pytest.mark.parametrize("p", [0, 4])
    def test_bad_user_index(self, fhs_psic, p):
        with pytest.raises(ValueError):
            fhs_psic.fading(p)


class TestThresholds:
    def test_oracles(self, fhs_psic):
        assert psi_star(fhs_psic, 3, 1e3) == pytest.approx(PSI3_STAR_30DB, rel=1e-12)
        assert vartheta_star(fhs_psic, 2) == pytest.approx(VARTHETA2_STAR, rel=1e-12)

    def test_psi_star_is_max(self, fhs_psic):
        rho = 100.0
        for p in range(1, 4):
            expected = max(psi(fhs_psic, q, rho, gain=fhs_psic.gains[p - 1]) for q in range(1, p + 1))
            assert psi_star(fhs_psic, p, rho) == pytest.approx(expected, rel=1e-15)

    @given(st.floats(1e-3, 1e8))
    def test_scales_inverse_rho(self, rho):
        s = reference_scenario()
        assert psi_star(s, 2, rho) * rho == pytest.approx(vartheta_star(s, 2), rel=1e-14)

    def test_rejects_zero_rho(self, fhs_psic):
        with pytest.raises(ValueError):
            psi_star(fhs_psic, 1, 0.0)
        with pytest.raises(ValueError):
            psi(fhs_psic, 1, -1.0)


class TestSinr:
    def test_oracle(self, fhs_psic):
        assert sinr_detect(fhs_psic, 2, 1, 0.1, 0.0, 100.0) == pytest.approx(SINR_2_1, rel=1e-13)

    def test_threshold_equivalence(self, fhs_psic):
        # Each SINR clears its threshold exactly when the gain exceeds psi.
        rho = 1e3
        for p in range(1, 4):
            for q in range(1, p + 1):
                edge = psi(fhs_psic, q, rho, gain=fhs_psic.gains[p - 1])
                th = fhs_psic.thresholds[q - 1]
                assert sinr_detect(fhs_psic, p, q, edge * 1.000001, 0.0, rho) > th
                assert sinr_detect(fhs_psic, p, q, edge * 0.999999, 0.0, rho) < th

    def test_residual_only_in_ipsic(self, fhs_psic, fhs_ipsic):
        a = sinr_detect(fhs_psic, 3, 3, 0.5, 10.0, 1e4)
        b = sinr_detect(fhs_ipsic, 3, 3, 0.5, 10.0, 1e4)
        assert b < a
        assert sinr_detect(fhs_psic, 3, 3, 0.5, 0.0, 1e4) == a

    def test_broadcasts(self, fhs_ipsic):
        g = np.linspace(0.1, 1, 5)
        out = sinr_detect(fhs_ipsic, 2, 2, g, np.zeros(5), 100.0)
        assert out.shape == (5,) and np.all(np.diff(out) > 0)

    def test_order_check(self, fhs_psic):
        with pytest.raises(ValueError):
            sinr_detect(fhs_psic, 1, 2, 0.1, 0.0, 1.0)

    def test_custom_geometry(self):
        u = [UserConfig(0.7, 0.2, LinkGeometry(angle_deg=0.05)), UserConfig(0.3, 0.4, LinkGeometry(angle_deg=0.2))]
        s = NomaScenario(u)
        assert s.gain_scale == pytest.approx(s.absolute_gains[0] / s.gains[0])
