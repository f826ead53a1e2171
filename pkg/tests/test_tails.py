import math

import numpy as np
import pytest
from scipy import optimize

from tailrisk import garch
from tailrisk.tails import (TailIndexError, TailIndexResult,
                            empirical_tail_index, garch_tail_index,
                            growth_moment, tail_comparison)


class TestGrowthMoment:
    def test_zero_moment_anchor(self):
        for a1, b1 in [(0.05, 0.9), (0.3, 0.65), (0.01, 0.5)]:
            assert growth_moment(0.0, a1, b1) == pytest.approx(1.0, abs=1e-10)
            assert growth_moment(0.0, a1, b1, "t", 6.0) == pytest.approx(
                1.0, abs=1e-10)

    def test_first_moment_identity(self):
        # k = 1: E[a1 Z^2 + b1] = a1 + b1 for unit-variance innovations
        for innovation, nu in (("gaussian", None), ("t", 5.0)):
            got = growth_moment(1.0, 0.08, 0.90, innovation, nu)
            assert got == pytest.approx(0.98, abs=1e-8)

    def test_t_needs_nu(self):
        with pytest.raises(TailIndexError, match="nu > 2"):
            growth_moment(1.0, 0.1, 0.8, "t", None)

    def test_unknown_innovation(self):
        with pytest.raises(TailIndexError, match="unknown innovation"):
            growth_moment(1.0, 0.1, 0.8, "cauchy")


class TestGarchTailIndex:
    def test_igarch_boundary_gaussian(self):
        assert garch_tail_index(0.1, 0.9) == pytest.approx(1.0, abs=1e-3)
        assert garch_tail_index(0.3, 0.7) == pytest.approx(1.0, abs=1e-3)

    def test_root_property(self):
        k = garch_tail_index(0.08, 0.90, "t", 6.0)
        assert growth_moment(k, 0.08, 0.90, "t", 6.0) == pytest.approx(
            1.0, abs=1e-6)

    def test_monte_carlo_root_oracle(self):
        a1, b1, nu = 0.08, 0.90, 6.0
        k = garch_tail_index(a1, b1, "t", nu)
        rng = np.random.default_rng(17)
        z = rng.standard_t(nu, 2_000_000) * math.sqrt((nu - 2.0) / nu)
        base = a1 * z * z + b1

        def g_mc(kk):
            return np.mean(base ** kk) - 1.0

        k_mc = optimize.brentq(g_mc, 0.5, min(5.0, nu / 2 - 1e-6))
        assert k == pytest.approx(k_mc, rel=0.02)

    def test_decreasing_in_alpha1(self):
        prev = np.inf
        for a1 in (0.02, 0.05, 0.10, 0.20, 0.30):
            k = garch_tail_index(a1, 0.6, "t", 8.0)
            assert k < prev
            prev = k

    def test_t_root_capped_below_half_nu(self):
        k = garch_tail_index(0.02, 0.5, "t", 5.0)
        assert k < 2.5

    def test_invalid_coefficients(self):
        with pytest.raises(TailIndexError, match="alpha1"):
            garch_tail_index(0.0, 0.9)
        with pytest.raises(TailIndexError, match="stationarity"):
            garch_tail_index(0.5, 0.6)

    def test_out_of_range(self):
        # nearly deterministic shrinkage: the moment never returns to 1
        with pytest.raises(TailIndexError, match="out of range"):
            garch_tail_index(1e-4, 0.5, k_max=10.0)


class TestEmpiricalTailIndex:
    def test_exact_pareto(self):
        # survival x^{-3} corresponds to k* = 1.5
        rng = np.random.default_rng(18)
        u = rng.random(100_000)
        x = u ** (-1.0 / 3.0)
        k_star, c = empirical_tail_index(x, 0.95)
        assert k_star == pytest.approx(1.5, abs=0.05)
        assert c > 0

    def test_scale_invariance(self):
        rng = np.random.default_rng(19)
        x = rng.standard_t(4, 50_000)
        k1, c1 = empirical_tail_index(x, 0.95)
        k2, c2 = empirical_tail_index(10.0 * x, 0.95)
        assert k1 == pytest.approx(k2, abs=1e-10)
        assert c1 != pytest.approx(c2, rel=0.5)

    def test_left_right_symmetry(self):
        rng = np.random.default_rng(20)
        x = rng.standard_t(4, 200_000)
        k_l, _ = empirical_tail_index(x, 0.05)
        k_r, _ = empirical_tail_index(x, 0.95)
        assert k_l == pytest.approx(k_r, rel=0.10)

    def test_too_few_exceedances(self):
        with pytest.raises(TailIndexError, match="exceedances"):
            empirical_tail_index(np.random.default_rng(0).standard_normal(100),
                                 0.95)

    def test_threshold_validation(self):
        with pytest.raises(TailIndexError, match="threshold_quantile"):
            empirical_tail_index(np.zeros(1000), 0.5)

    def test_garch_path_consistency(self):
        # heavy-feedback parameters so the power law sets in by the 5%
        # threshold at this path length
        a1, b1, nu = 0.3, 0.65, 6.0
        k = garch_tail_index(a1, b1, "t", nu)
        params = garch.GarchParams(0.0, 0.0, (1e-6, b1, a1), nu)
        r = garch.simulate(params, "GARCH", 1_000_000, seed=21)
        for thr in (0.05, 0.95):
            k_star, _ = empirical_tail_index(r, thr)
            assert abs(k_star / k - 1.0) < 0.15


class TestTailComparison:
    def test_equal_indices(self):
        assert tail_comparison(1.61, 1.61).log_ratio == 0.0

    def test_log_identity(self):
        res = tail_comparison(3.0, 1.5)
        assert res.log_ratio == pytest.approx(math.log(2.0), abs=1e-12)

    def test_result_consistency_enforced(self):
        with pytest.raises(TailIndexError, match="inconsistent"):
            TailIndexResult(1.61, 1.45, 0.05, 0.0455)

    def test_positive_required(self):
        with pytest.raises(TailIndexError, match="positive"):
            tail_comparison(-1.0, 1.5)
