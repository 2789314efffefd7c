"""Tests for the slender-body multipliers and their bound families."""

import math

import mpmath
import numpy as np
import pytest

from filament.multipliers import (
    EULER_GAMMA,
    MultiplierTable,
    build_table,
    eval_mn,
    eval_mt,
    lowk_reference_mn,
    lowk_reference_mt,
    lowk_rft_difference,
    rft_constants,
)

EPS_SWEEP = (1e-2, 1e-3, 1e-4, 1e-5)


def mpmath_mt(eps, k, dps=50):
    """Extended-precision evaluation of the tangential multiplier."""
    with mpmath.workdps(dps):
        x = 2 * mpmath.pi * eps * abs(k)
        K0, K1 = mpmath.besselk(0, x), mpmath.besselk(1, x)
        return float((2 * K0 * K1 + x * (K0**2 - K1**2)) / (4 * mpmath.pi * x * K1**2))


def mpmath_mn(eps, k, dps=50):
    with mpmath.workdps(dps):
        x = 2 * mpmath.pi * eps * abs(k)
        K0, K1, K2 = (mpmath.besselk(j, x) for j in (0, 1, 2))
        num = 2 * K0 * K1 * K2 + x * (K1**2 * (K0 + K2) - 2 * K0**2 * K2)
        den = 2 * mpmath.pi * x * (4 * K1**2 * K2 + x * K1 * (K1**2 - K0 * K2))
        return float(num / den)


class TestZeroModeAndSymmetry:
    @pytest.mark.parametrize("eps", EPS_SWEEP)
    def test_zero_modes(self, eps):
        log_eps = abs(math.log(eps))
        assert eval_mt(eps, 0) == log_eps / (2 * math.pi)
        assert eval_mn(eps, 0) == log_eps / (4 * math.pi)

    def test_evenness(self):
        for k in (1, 3, 17, 4096):
            assert eval_mt(1e-3, k) == eval_mt(1e-3, -k)
            assert eval_mn(1e-3, k) == eval_mn(1e-3, -k)

    def test_determinism(self):
        a = eval_mn(1e-4, np.arange(1, 100))
        b = eval_mn(1e-4, np.arange(1, 100))
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("bad", [0.0, 1.0, 1.5, -0.1])
    def test_epsilon_domain(self, bad):
        with pytest.raises(ValueError):
            eval_mt(bad, 1)
        with pytest.raises(ValueError):
            eval_mn(bad, 1)


class TestExtendedPrecisionOracle:
    @pytest.mark.parametrize("eps,k", [(1e-2, 1), (1e-2, 100), (1e-3, 5),
                                       (1e-4, 4096), (1e-5, 17)])
    def test_mt_matches_mpmath(self, eps, k):
        assert eval_mt(eps, k) == pytest.approx(mpmath_mt(eps, k), rel=1e-12)

    @pytest.mark.parametrize("eps,k", [(1e-2, 1), (1e-2, 100), (1e-3, 5),
                                       (1e-4, 4096), (1e-5, 17)])
    def test_mn_matches_mpmath(self, eps, k):
        assert eval_mn(eps, k) == pytest.approx(mpmath_mn(eps, k), rel=1e-12)

    def test_near_underflow_regime(self):
        # x = 2 pi eps k around 600 and far beyond: the scaled-Bessel
        # ratio evaluation must agree with extended precision and stay
        # on the asymptotic trend 1/m ~ c eps k.
        eps = 1e-2
        k600 = int(round(600 / (2 * math.pi * eps)))
        assert eval_mt(eps, k600) == pytest.approx(mpmath_mt(eps, k600, dps=300), rel=1e-10)
        assert eval_mn(eps, k600) == pytest.approx(mpmath_mn(eps, k600, dps=300), rel=1e-10)
        k_huge = 10 * k600  # raw Bessel values underflow to 0 here
        assert 1.0 / eval_mt(eps, k_huge) == pytest.approx(8 * math.pi**2 * eps * k_huge, rel=1e-4)
        assert 1.0 / eval_mn(eps, k_huge) == pytest.approx(6 * math.pi**2 * eps * k_huge, rel=1e-4)


class TestLowWavenumberExpansion:
    @pytest.mark.parametrize("eps,k", [(1e-4, 1), (1e-5, 3), (1e-6, 1)])
    def test_mt_expansion(self, eps, k):
        envelope = 6.0 * (eps * k * math.log(eps * k)) ** 2
        assert abs(eval_mt(eps, k) - lowk_reference_mt(eps, k)) < envelope

    @pytest.mark.parametrize("eps,k", [(1e-4, 1), (1e-5, 3), (1e-6, 1)])
    def test_mn_expansion(self, eps, k):
        envelope = 6.0 * (eps * k * math.log(eps * k)) ** 2
        assert abs(eval_mn(eps, k) - lowk_reference_mn(eps, k)) < envelope

    def test_expansion_structure_small_k(self):
        # tangential difference reproduces the -2 log|k| structure at eps=1e-6
        eps = 1e-6
        d1 = lowk_rft_difference(eps, 1, "tangential")
        d2 = lowk_rft_difference(eps, 2, "tangential")
        expected = (d1 - 2.0 * math.log(2.0) / (4 * math.pi))
        assert d2 == pytest.approx(expected, abs=1e-6)
        # and the k=1 value is the eps-independent expansion constant
        const = (-1 - 2 * EULER_GAMMA - 2 * math.log(math.pi)) / (4 * math.pi)
        assert d1 == pytest.approx(const, abs=1e-8)


class TestRftDifference:
    def test_zero_at_k0(self):
        assert lowk_rft_difference(1e-3, 0, "tangential") == 0.0
        assert lowk_rft_difference(1e-3, 0, "normal") == 0.0

    def test_domain_error_beyond_crossover(self):
        eps = 1e-3
        k_bad = int(1.0 / (2 * math.pi * eps)) + 1
        with pytest.raises(ValueError):
            lowk_rft_difference(eps, k_bad, "tangential")
        with pytest.raises(ValueError):
            lowk_rft_difference(eps, -k_bad, "normal")

    def test_direction_validated(self):
        with pytest.raises(ValueError):
            lowk_rft_difference(1e-3, 1, "sideways")

    def test_eps_stability_at_fixed_k(self):
        # the difference at fixed k is eps-independent up to the
        # O((eps k log eps k)^2) envelopes
        for direction in ("tangential", "normal"):
            a = lowk_rft_difference(1e-3, 4, direction)
            b = lowk_rft_difference(1e-5, 4, direction)
            envelope = 6.0 * (1e-3 * 4 * math.log(1e-3 * 4)) ** 2
            assert abs(a - b) < 2.0 * envelope


class TestPositivityAndComparability:
    @pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
    def test_positive_up_to_4096(self, eps):
        table = build_table(eps, 4096)
        assert np.all(table.mt > 0.0)
        assert np.all(table.mn > 0.0)

    def test_comparability_sandwich(self):
        # m_n <= m_t <= 2 m_n holds pointwise for all tested eps, k
        for eps in EPS_SWEEP:
            k = np.arange(0, 4097)
            mt = eval_mt(eps, k)
            mn = eval_mn(eps, k)
            assert np.all(mt <= 2.0 * mn * (1.0 + 1e-12))
            assert np.all(mt >= mn * 0.999 * (3.0 / 4.0))

    def test_rft_constants(self):
        c = rft_constants(1e-3)
        assert c.tangential == 2.0 * c.normal
        assert c.tangential == abs(math.log(1e-3)) / (2 * math.pi)


class TestTable:
    def test_table_zero_mode_and_shape(self):
        t = build_table(1e-3, 128)
        assert isinstance(t, MultiplierTable)
        assert t.mt.shape == (129,)
        assert t.mt[0] == abs(math.log(1e-3)) / (2 * math.pi)

    def test_tables_nest_bitwise(self):
        small = build_table(1e-3, 64)
        large = build_table(1e-3, 128)
        assert np.array_equal(small.mt, large.mt[:65])
        assert np.array_equal(small.mn, large.mn[:65])

    def test_table_immutable(self):
        t = build_table(1e-3, 16)
        with pytest.raises(ValueError):
            t.mt[0] = 0.0

    def test_kmax_validated(self):
        with pytest.raises(ValueError):
            build_table(1e-3, 0)
