"""VaR and ES backtests: Bin, POF, CCI, DQ, Fisher combination and the
unconditional ES test with simulated critical values.

Conventions: a hit on the left tail is r_t < VaR_t, on the right tail
r_t > VaR_t (ties never count).  The nominal hit probability is alpha on the
left and 1 - alpha on the right.  All tests reject at the 1% level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps
from scipy.special import xlogy

REJECT_LEVEL = 0.01
P_FLOOR = 1e-15


class BacktestError(ValueError):
    pass


def side_of(alpha: float) -> str:
    if not 0.0 < alpha < 1.0:
        raise BacktestError(f"alpha must be in (0,1), got {alpha}")
    return "right" if alpha >= 0.5 else "left"


@dataclass(frozen=True)
class HitSequence:
    """Binary VaR violations aligned with forecast dates."""

    hits: np.ndarray
    alpha: float
    side: str
    dates: np.ndarray | None = None

    def __post_init__(self):
        hits = np.asarray(self.hits, dtype=bool)
        if self.side != side_of(self.alpha):
            raise BacktestError(
                f"side '{self.side}' inconsistent with alpha={self.alpha}")
        object.__setattr__(self, "hits", hits)

    @property
    def nominal_p(self) -> float:
        return self.alpha if self.side == "left" else 1.0 - self.alpha

    def __len__(self):
        return len(self.hits)


@dataclass(frozen=True)
class TestResult:
    test_name: str
    statistic: float
    p_value: float
    reject_at_1pct: bool
    auxiliary: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise BacktestError(f"p-value {self.p_value} outside [0,1]")
        if self.reject_at_1pct != (self.p_value < REJECT_LEVEL):
            raise BacktestError("reject flag inconsistent with p-value")


def _result(name, stat, p, **aux) -> TestResult:
    p = float(min(max(p, 0.0), 1.0))
    return TestResult(name, float(stat), p, p < REJECT_LEVEL, dict(aux))


@dataclass(frozen=True)
class DeviationRecord:
    expected_failures: float
    observed_failures: int
    deviation: float


def hit_sequence(returns, forecasts, alpha: float,
                 dates=None) -> HitSequence:
    r = np.asarray(getattr(returns, "values", returns), dtype=float)
    v = np.asarray(forecasts, dtype=float)
    if len(r) != len(v):
        raise BacktestError(
            f"returns ({len(r)}) and forecasts ({len(v)}) misaligned")
    side = side_of(alpha)
    hits = r < v if side == "left" else r > v
    return HitSequence(hits, alpha, side, dates)


def bin_test(h: HitSequence) -> TestResult:
    """Binomial z-test on the failure count, two-sided normal p-value."""
    n = len(h)
    if n == 0:
        raise BacktestError("empty hit sequence")
    p = h.nominal_p
    x = int(h.hits.sum())
    z = (x - n * p) / math.sqrt(n * p * (1.0 - p))
    return _result("Bin", z, 2.0 * sps.norm.sf(abs(z)), failures=x, expected=n * p)


def pof_test(h: HitSequence) -> TestResult:
    """Kupiec proportion-of-failures likelihood ratio, chi-square(1)."""
    n = len(h)
    if n == 0:
        raise BacktestError("empty hit sequence")
    p = h.nominal_p
    x = int(h.hits.sum())
    # 0*log(0) = 0 handles x in {0, n}
    lr = -2.0 * (xlogy(n - x, 1.0 - p) + xlogy(x, p)
                 - xlogy(n - x, 1.0 - x / n) - xlogy(x, x / n))
    lr = max(float(lr), 0.0)
    return _result("POF", lr, sps.chi2.sf(lr, 1), failures=x)


def cci_test(h: HitSequence) -> TestResult:
    """Christoffersen conditional-coverage independence test."""
    if len(h) < 2:
        raise BacktestError("need at least 2 observations")
    hits = h.hits.astype(int)
    prev, cur = hits[:-1], hits[1:]
    n00 = int(np.sum((prev == 0) & (cur == 0)))
    n01 = int(np.sum((prev == 0) & (cur == 1)))
    n10 = int(np.sum((prev == 1) & (cur == 0)))
    n11 = int(np.sum((prev == 1) & (cur == 1)))
    counts = {"n00": n00, "n01": n01, "n10": n10, "n11": n11}
    if n01 + n11 == 0:
        return _result("CCI", 0.0, 1.0, degenerate=True, **counts)
    pi = (n01 + n11) / (n00 + n01 + n10 + n11)
    pi01 = n01 / (n00 + n01) if n00 + n01 else 0.0
    pi11 = n11 / (n10 + n11) if n10 + n11 else 0.0
    ll_null = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi)
    ll_alt = (xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01)
              + xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11))
    lr = max(float(-2.0 * (ll_null - ll_alt)), 0.0)
    return _result("CCI", lr, sps.chi2.sf(lr, 1), **counts)


def dq_test(h: HitSequence, forecasts, lags: int = 4) -> TestResult:
    """Dynamic quantile test: regress centered hits on their lags and the
    contemporaneous VaR; Wald statistic is chi-square(lags + 2)."""
    n = len(h)
    if n <= lags + 10:
        raise BacktestError(f"need > {lags + 10} observations, got {n}")
    v = np.asarray(forecasts, dtype=float)
    if len(v) != n:
        raise BacktestError("forecasts misaligned with hits")
    p = h.nominal_p
    hits = h.hits.astype(float)
    y = hits[lags:] - p
    cols = [np.ones(n - lags)]
    cols += [hits[lags - k:n - k] for k in range(1, lags + 1)]
    cols.append(v[lags:])
    X = np.column_stack(cols)
    xtx = X.T @ X
    degenerate = np.linalg.matrix_rank(xtx) < xtx.shape[0]
    xtx_inv = np.linalg.pinv(xtx)
    beta = xtx_inv @ (X.T @ y)
    stat = float(beta @ xtx @ beta) / (p * (1.0 - p))
    stat = max(stat, 0.0)
    return _result("DQ", stat, sps.chi2.sf(stat, lags + 2),
                   degenerate=bool(degenerate), lags=lags)


def fisher_combine(p_values) -> TestResult:
    """Fisher product test: F = -2 sum(ln p), chi-square with 2n dof."""
    ps = list(p_values)
    if not ps:
        raise BacktestError("no p-values to combine")
    floored = False
    clean = []
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise BacktestError(f"p-value {p} outside [0,1]")
        if p < P_FLOOR:
            p = P_FLOOR
            floored = True
        clean.append(p)
    f = -2.0 * float(np.sum(np.log(clean)))
    return _result("Fisher", f, sps.chi2.sf(f, 2 * len(clean)),
                   n_combined=len(clean), floored=floored)


# --- unconditional ES backtest ---------------------------------------------

def _reference_var_es(reference: str, p: float):
    """Left-tail VaR/ES of a unit-variance reference distribution."""
    if reference == "normal":
        q = sps.norm.ppf(p)
        return float(q), float(-sps.norm.pdf(q) / p)
    if reference == "t3":
        nu = 3.0
        s = math.sqrt((nu - 2.0) / nu)
        qt = sps.t.ppf(p, nu)
        es = -s * sps.t.pdf(qt, nu) * (nu + qt * qt) / ((nu - 1.0) * p)
        return float(s * qt), float(es)
    raise BacktestError(f"unknown reference '{reference}' (use normal or t3)")


def _reference_sampler(reference: str, rng, size):
    if reference == "normal":
        return rng.standard_normal(size)
    nu = 3.0
    return rng.standard_t(nu, size) * math.sqrt((nu - 2.0) / nu)


def un_statistic(returns, var_forecasts, es_forecasts, alpha: float) -> float:
    """Z = 1 - mean ES-scaled tail loss; 0 under correct ES, negative under
    risk underestimation."""
    r = np.asarray(getattr(returns, "values", returns), dtype=float)
    v = np.asarray(var_forecasts, dtype=float)
    es = np.asarray(es_forecasts, dtype=float)
    if not len(r) == len(v) == len(es):
        raise BacktestError("returns, VaR and ES forecasts misaligned")
    if np.any(es == 0.0):
        raise BacktestError("zero ES forecast")
    side = side_of(alpha)
    hits = r < v if side == "left" else r > v
    p = alpha if side == "left" else 1.0 - alpha
    return 1.0 - float(np.sum((r / es)[hits])) / (len(r) * p)


def simulate_z_sample(reference: str, n_obs: int, p: float,
                      n_sims: int = 50000, seed: int = 20080102) -> np.ndarray:
    """Sorted sample of the UN statistic under iid reference returns with
    the true (constant) VaR/ES forecasts."""
    var0, es0 = _reference_var_es(reference, p)
    rng = np.random.default_rng(seed)
    out = np.empty(n_sims)
    chunk = max(1, int(2e7) // max(n_obs, 1))
    done = 0
    while done < n_sims:
        m = min(chunk, n_sims - done)
        r = _reference_sampler(reference, rng, (m, n_obs))
        tail = np.where(r < var0, r / es0, 0.0)
        out[done:done + m] = 1.0 - tail.sum(axis=1) / (n_obs * p)
        done += m
    out.sort()
    return out


_Z_CACHE: dict = {}


def _z_sample_cached(reference, n_obs, p, n_sims, seed):
    key = (reference, n_obs, round(p, 10), n_sims, seed)
    if key not in _Z_CACHE:
        _Z_CACHE[key] = simulate_z_sample(reference, n_obs, p, n_sims, seed)
    return _Z_CACHE[key]


def simulate_critical_value(reference: str, n_obs: int, p: float,
                            confidence: float = REJECT_LEVEL,
                            n_sims: int = 50000,
                            seed: int = 20080102) -> float:
    """Empirical confidence-quantile of the simulated UN statistic."""
    z = _z_sample_cached(reference, n_obs, p, n_sims, seed)
    return float(np.quantile(z, confidence))


def un_test(returns, var_forecasts, es_forecasts, alpha: float,
            reference: str = "normal", n_sims: int = 50000,
            seed: int = 20080102) -> TestResult:
    """Unconditional ES backtest against a simulated null distribution.

    One-sided: rejection when the statistic falls below the simulated 1%
    critical value of the chosen reference distribution.
    """
    z_obs = un_statistic(returns, var_forecasts, es_forecasts, alpha)
    side = side_of(alpha)
    p = alpha if side == "left" else 1.0 - alpha
    n = len(np.asarray(getattr(returns, "values", returns)))
    sample = _z_sample_cached(reference, n, p, n_sims, seed)
    p_value = float(np.searchsorted(sample, z_obs, side="right")) / len(sample)
    name = "UN-N" if reference == "normal" else "UN-t"
    return _result(name, z_obs, p_value, reference=reference,
                   critical_1pct=float(np.quantile(sample, REJECT_LEVEL)))


def consistency_check(un_normal: TestResult, un_t: TestResult) -> str:
    """Inconsistent when the normal-reference test sees no undervaluation
    but the t-reference test does."""
    if un_t.reject_at_1pct and not un_normal.reject_at_1pct:
        return "inconsistent"
    return "consistent"


def deviation_record(h: HitSequence) -> DeviationRecord:
    expected = len(h) * h.nominal_p
    observed = int(h.hits.sum())
    return DeviationRecord(expected, observed, (observed - expected) / expected)
