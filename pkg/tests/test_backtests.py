import math

import numpy as np
import pytest
from scipy import stats as sps

from tailrisk import backtests as bt
from tailrisk.backtests import (BacktestError, DeviationRecord, HitSequence,
                                TestResult, bin_test, cci_test,
                                consistency_check, deviation_record, dq_test,
                                fisher_combine, hit_sequence, pof_test,
                                side_of, simulate_critical_value,
                                simulate_z_sample, un_statistic, un_test)


def _hits(bools, alpha=0.05):
    return HitSequence(np.asarray(bools, dtype=bool), alpha, side_of(alpha))


def _hits_with_count(n, x, alpha=0.05, seed=0):
    """n observations with exactly x hits, randomly placed."""
    rng = np.random.default_rng(seed)
    hits = np.zeros(n, dtype=bool)
    hits[rng.choice(n, size=x, replace=False)] = True
    return _hits(hits, alpha)


class TestHitSequence:
    def test_all_returns_above_left_var_no_hits(self):
        r = np.full(50, 0.01)
        v = np.full(50, -0.05)
        h = hit_sequence(r, v, 0.05)
        assert h.hits.sum() == 0 and h.side == "left"

    def test_ties_are_not_hits(self):
        h = hit_sequence(np.array([-0.05, -0.06]), np.array([-0.05, -0.05]), 0.05)
        assert list(h.hits) == [False, True]
        h = hit_sequence(np.array([0.05, 0.06]), np.array([0.05, 0.05]), 0.95)
        assert list(h.hits) == [False, True]

    def test_side_flip_mirrors_negated_returns(self):
        rng = np.random.default_rng(1)
        r = rng.standard_normal(200)
        v = np.full(200, -1.3)
        left = hit_sequence(r, v, 0.05)
        right = hit_sequence(-r, -v, 0.95)
        np.testing.assert_array_equal(left.hits, right.hits)

    def test_misalignment_rejected(self):
        with pytest.raises(BacktestError, match="misaligned"):
            hit_sequence(np.zeros(5), np.zeros(4), 0.05)

    def test_nominal_p(self):
        assert _hits([0], 0.05).nominal_p == 0.05
        assert _hits([0], 0.99).nominal_p == pytest.approx(0.01)

    def test_side_consistency_enforced(self):
        with pytest.raises(BacktestError, match="inconsistent"):
            HitSequence(np.zeros(5, dtype=bool), 0.05, "right")

    def test_table_counts_example(self):
        # 14 hits in 688 days at the 1% level
        h = _hits_with_count(688, 14, alpha=0.01)
        d = deviation_record(h)
        assert d.expected_failures == pytest.approx(6.88)
        assert d.observed_failures == 14
        assert d.deviation == pytest.approx((14 - 6.88) / 6.88)


class TestResultInvariants:
    def test_reject_flag_must_match_pvalue(self):
        with pytest.raises(BacktestError, match="inconsistent"):
            TestResult("X", 0.0, 0.5, True)
        with pytest.raises(BacktestError, match="p-value"):
            TestResult("X", 0.0, 1.5, False)


class TestBinTest:
    def test_exact_coverage_gives_zero(self):
        h = _hits_with_count(100, 5, alpha=0.05)
        res = bin_test(h)
        assert res.statistic == 0.0 and res.p_value == 1.0

    def test_table_example(self):
        h = _hits_with_count(688, 14, alpha=0.01)
        res = bin_test(h)
        z = (14 - 6.88) / math.sqrt(688 * 0.01 * 0.99)
        assert res.statistic == pytest.approx(z, abs=1e-12)
        assert res.statistic == pytest.approx(2.728, abs=2e-3)
        assert res.p_value == pytest.approx(0.0064, abs=5e-4)
        assert res.reject_at_1pct

    def test_doubling_scales_z_by_sqrt2(self):
        h1 = _hits_with_count(400, 30, alpha=0.05)
        h2 = _hits_with_count(800, 60, alpha=0.05)
        assert bin_test(h2).statistic == pytest.approx(
            math.sqrt(2) * bin_test(h1).statistic, rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(BacktestError, match="empty"):
            bin_test(_hits([]))


class TestPofTest:
    def test_exact_proportion_gives_zero(self):
        h = _hits_with_count(200, 10, alpha=0.05)
        res = pof_test(h)
        assert res.statistic == pytest.approx(0.0, abs=1e-12)
        assert res.p_value == pytest.approx(1.0, abs=1e-6)

    def test_direct_formula_oracle(self):
        n, x, p = 688, 14, 0.01
        h = _hits_with_count(n, x, alpha=0.01)
        lr = -2.0 * ((n - x) * math.log(1 - p) + x * math.log(p)
                     - (n - x) * math.log(1 - x / n) - x * math.log(x / n))
        res = pof_test(h)
        assert res.statistic == pytest.approx(lr, abs=1e-10)
        assert res.p_value < 0.05

    def test_permutation_invariant(self):
        a = pof_test(_hits_with_count(300, 12, seed=1))
        b = pof_test(_hits_with_count(300, 12, seed=2))
        assert a.statistic == b.statistic and a.p_value == b.p_value

    def test_zero_hits_finite(self):
        res = pof_test(_hits(np.zeros(200, dtype=bool)))
        assert np.isfinite(res.statistic) and 0 <= res.p_value <= 1

    def test_all_hits_finite(self):
        res = pof_test(_hits(np.ones(60, dtype=bool)))
        assert np.isfinite(res.statistic) and res.reject_at_1pct


class TestCciTest:
    def test_equal_transition_probabilities_give_zero(self):
        # [0,0,1,1] repeated then a closing 0: the four transition counts
        # are equal, so conditional and unconditional hit rates coincide
        hits = np.array(([0, 0, 1, 1] * 5) + [0], dtype=bool)
        res = cci_test(_hits(hits))
        aux = res.auxiliary
        assert aux["n00"] == aux["n01"] == aux["n10"] == aux["n11"] == 5
        assert res.statistic == pytest.approx(0.0, abs=1e-12)
        assert res.p_value == pytest.approx(1.0, abs=1e-12)

    def test_clustered_hits_reject(self):
        hits = np.zeros(300, dtype=bool)
        hits[100:115] = True      # one long run
        res = cci_test(_hits(hits))
        assert res.statistic > 20 and res.reject_at_1pct

    def test_separating_hits_weakly_decreases_n11(self):
        clustered = np.array([0, 1, 1, 1, 0, 1, 1, 0] * 5, dtype=bool)
        spread = np.array([0, 1, 0, 1, 0, 1, 0, 1] * 5, dtype=bool)
        n11_c = cci_test(_hits(clustered)).auxiliary["n11"]
        n11_s = cci_test(_hits(spread)).auxiliary["n11"]
        assert n11_s <= n11_c

    def test_no_hits_degenerate(self):
        res = cci_test(_hits(np.zeros(100, dtype=bool)))
        assert res.statistic == 0.0 and res.p_value == 1.0
        assert res.auxiliary["degenerate"]

    def test_too_short_rejected(self):
        with pytest.raises(BacktestError, match="at least 2"):
            cci_test(_hits([True]))


class TestDqTest:
    def test_alternating_hits_reject(self):
        hits = np.arange(200) % 2 == 0
        h = HitSequence(hits, 0.5, "right")
        v = np.linspace(0.01, 0.02, 200)
        res = dq_test(h, v)
        assert res.statistic > 100 and res.reject_at_1pct

    def test_constant_var_shift_leaves_statistic_unchanged(self):
        # the VaR column shifted by a constant stays inside the span of
        # [intercept, lags, VaR], so the Wald statistic is unchanged
        rng = np.random.default_rng(2)
        hits = rng.random(500) < 0.05
        v = -0.03 + 0.002 * rng.standard_normal(500)
        h = _hits(hits)
        s1 = dq_test(h, v).statistic
        s2 = dq_test(h, v + 0.01).statistic
        assert s1 == pytest.approx(s2, abs=1e-9)

    def test_var_scaling_changes_statistic(self):
        rng = np.random.default_rng(3)
        hits = rng.random(500) < 0.05
        v = -0.03 + 0.01 * rng.standard_normal(500)
        # correlate the forecasts with the hits so VaR carries signal
        v[hits] -= 0.05
        h = _hits(hits)
        assert dq_test(h, v).statistic != pytest.approx(
            dq_test(h, np.full(500, -0.03)).statistic, abs=1e-6)

    def test_zero_hits_degenerate_flag(self):
        h = _hits(np.zeros(200, dtype=bool))
        res = dq_test(h, np.full(200, -0.05))
        assert res.auxiliary["degenerate"]
        assert np.isfinite(res.statistic)

    def test_too_short_rejected(self):
        with pytest.raises(BacktestError, match="observations"):
            dq_test(_hits(np.zeros(10, dtype=bool)), np.zeros(10))

    def test_misaligned_forecasts_rejected(self):
        with pytest.raises(BacktestError, match="misaligned"):
            dq_test(_hits(np.zeros(100, dtype=bool)), np.zeros(99))

    def test_iid_hits_moderate_statistic(self):
        rng = np.random.default_rng(4)
        rejections = 0
        for _ in range(100):
            hits = rng.random(700) < 0.05
            v = np.full(700, -1.6) + 0.01 * rng.standard_normal(700)
            rejections += dq_test(_hits(hits), v).reject_at_1pct
        assert rejections <= 8    # loose size sanity; exact band in acceptance


class TestFisherCombine:
    def test_all_ones(self):
        res = fisher_combine([1.0, 1.0, 1.0, 1.0])
        assert res.statistic == 0.0 and res.p_value == 1.0

    def test_two_point_oracle(self):
        res = fisher_combine([0.05, 0.05])
        assert res.statistic == pytest.approx(-4.0 * math.log(0.05), abs=1e-12)
        assert res.statistic == pytest.approx(11.983, abs=1e-3)
        assert res.p_value == pytest.approx(0.0175, abs=5e-4)
        assert not res.reject_at_1pct

    def test_monotone_in_each_p(self):
        base = fisher_combine([0.3, 0.4, 0.5]).statistic
        assert fisher_combine([0.2, 0.4, 0.5]).statistic > base
        assert fisher_combine([0.3, 0.4, 0.45]).statistic > base

    def test_zero_floored_and_flagged(self):
        res = fisher_combine([0.0, 0.5])
        assert res.auxiliary["floored"]
        assert np.isfinite(res.statistic)

    def test_empty_rejected(self):
        with pytest.raises(BacktestError, match="no p-values"):
            fisher_combine([])

    def test_out_of_range_rejected(self):
        with pytest.raises(BacktestError, match="outside"):
            fisher_combine([0.5, 1.2])

    def test_null_distribution_matches_chi2(self):
        rng = np.random.default_rng(5)
        ps = rng.random((2000, 4))
        f = -2.0 * np.log(ps).sum(axis=1)
        stats = [fisher_combine(row).statistic for row in ps[:50]]
        np.testing.assert_allclose(stats, f[:50], rtol=1e-12)
        assert sps.kstest(f, sps.chi2(8).cdf).pvalue > 0.01


class TestUnStatistic:
    def test_constructed_null_is_zero(self):
        n, p = 100, 0.05
        r = np.zeros(n)
        r[:5] = -2.0                      # 5 = N*p exceedances, each at ES
        v = np.full(n, -1.5)
        es = np.full(n, -2.0)
        assert un_statistic(r, v, es, p) == pytest.approx(0.0, abs=1e-12)

    def test_halved_es_goes_negative(self):
        rng = np.random.default_rng(6)
        r = rng.standard_normal(700)
        v = np.full(700, sps.norm.ppf(0.05))
        es0 = -sps.norm.pdf(sps.norm.ppf(0.05)) / 0.05
        z_true = un_statistic(r, v, np.full(700, es0), 0.05)
        z_half = un_statistic(r, v, np.full(700, es0 / 2.0), 0.05)
        assert z_half < z_true and z_half < 0.0

    def test_right_tail_symmetry(self):
        rng = np.random.default_rng(7)
        r = rng.standard_normal(500)
        v = np.full(500, -1.5)
        es = np.full(500, -2.1)
        left = un_statistic(r, v, es, 0.05)
        right = un_statistic(-r, -v, -es, 0.95)
        assert left == pytest.approx(right, abs=1e-12)

    def test_zero_es_rejected(self):
        with pytest.raises(BacktestError, match="zero ES"):
            un_statistic(np.zeros(5), np.full(5, -1.0), np.zeros(5), 0.05)

    def test_misaligned_rejected(self):
        with pytest.raises(BacktestError, match="misaligned"):
            un_statistic(np.zeros(5), np.zeros(4), np.ones(5), 0.05)


class TestCriticalValues:
    def test_negative_at_one_percent(self):
        cv = simulate_critical_value("normal", 250, 0.05, n_sims=5000)
        assert cv < 0.0

    def test_t3_more_negative_than_normal(self):
        cv_n = simulate_critical_value("normal", 250, 0.05, n_sims=10000)
        cv_t = simulate_critical_value("t3", 250, 0.05, n_sims=10000)
        assert cv_t < cv_n

    def test_doubling_n_shrinks_magnitude(self):
        cv1 = simulate_critical_value("normal", 250, 0.05, n_sims=10000)
        cv2 = simulate_critical_value("normal", 500, 0.05, n_sims=10000)
        assert abs(cv2) < abs(cv1)

    def test_sample_deterministic_and_sorted(self):
        a = simulate_z_sample("normal", 100, 0.05, n_sims=2000, seed=9)
        b = simulate_z_sample("normal", 100, 0.05, n_sims=2000, seed=9)
        np.testing.assert_array_equal(a, b)
        assert np.all(np.diff(a) >= 0)

    def test_unknown_reference_rejected(self):
        with pytest.raises(BacktestError, match="unknown reference"):
            simulate_z_sample("cauchy", 100, 0.05)


class TestUnTest:
    def test_correct_forecasts_accepted(self):
        rng = np.random.default_rng(10)
        r = rng.standard_normal(700)
        q = sps.norm.ppf(0.05)
        v = np.full(700, q)
        es = np.full(700, -sps.norm.pdf(q) / 0.05)
        res = un_test(r, v, es, 0.05, n_sims=10000)
        assert res.test_name == "UN-N"
        assert not res.reject_at_1pct

    def test_underestimated_risk_rejected(self):
        rng = np.random.default_rng(11)
        r = 2.0 * rng.standard_normal(700)    # double the forecast volatility
        q = sps.norm.ppf(0.05)
        v = np.full(700, q)
        es = np.full(700, -sps.norm.pdf(q) / 0.05)
        res = un_test(r, v, es, 0.05, n_sims=10000)
        assert res.statistic < 0.0
        assert res.reject_at_1pct

    def test_t3_reference_name(self):
        rng = np.random.default_rng(12)
        r = rng.standard_normal(300)
        res = un_test(r, np.full(300, -1.6), np.full(300, -2.1), 0.05,
                      reference="t3", n_sims=5000)
        assert res.test_name == "UN-t"


class TestConsistencyCheck:
    def _res(self, name, reject):
        p = 0.001 if reject else 0.5
        return TestResult(name, -0.1, p, reject)

    def test_rules(self):
        both = consistency_check(self._res("UN-N", True), self._res("UN-t", True))
        assert both == "consistent"
        neither = consistency_check(self._res("UN-N", False), self._res("UN-t", False))
        assert neither == "consistent"
        n_only = consistency_check(self._res("UN-N", True), self._res("UN-t", False))
        assert n_only == "consistent"
        t_only = consistency_check(self._res("UN-N", False), self._res("UN-t", True))
        assert t_only == "inconsistent"


class TestDeviationRecord:
    def test_expected_cells(self):
        assert deviation_record(_hits_with_count(698, 7, alpha=0.01)
                                ).expected_failures == pytest.approx(6.98)
        assert deviation_record(_hits_with_count(688, 7, alpha=0.01)
                                ).expected_failures == pytest.approx(6.88)

    def test_percent_deviation(self):
        d = DeviationRecord(6.82, 14, (14 - 6.82) / 6.82)
        assert 100 * d.deviation == pytest.approx(105.28, abs=0.01)

    def test_zero_deviation(self):
        d = deviation_record(_hits_with_count(200, 10, alpha=0.05))
        assert d.deviation == 0.0

    def test_exact_arithmetic(self):
        d = deviation_record(_hits_with_count(400, 13, alpha=0.05))
        assert d.deviation == (13 - 400 * 0.05) / (400 * 0.05)
