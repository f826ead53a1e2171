"""Power-law tail indices: model-implied for GARCH(1,1) and empirical fits.

The marginal tails of a stationary GARCH(1,1) process decay like
P(|X| > x) ~ c x^(-2k), where k is the unique positive root of
E[(a1 Z^2 + b1)^k] = 1 for the standardized innovation Z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy import stats as sps


class TailIndexError(ValueError):
    pass


@dataclass(frozen=True)
class TailIndexResult:
    k_garch: float
    k_empirical: float
    side_quantile: float
    log_ratio: float

    def __post_init__(self):
        if not (self.k_garch > 0 and self.k_empirical > 0):
            raise TailIndexError("tail indices must be strictly positive")
        expected = math.log(self.k_garch / self.k_empirical)
        if abs(expected - self.log_ratio) > 1e-12:
            raise TailIndexError("log_ratio inconsistent with k values")


def _innovation_pdf(innovation: str, nu: float | None):
    if innovation == "gaussian":
        return sps.norm.pdf
    if innovation == "t":
        if nu is None or nu <= 2:
            raise TailIndexError("Student-t innovation needs nu > 2")
        s = math.sqrt((nu - 2.0) / nu)
        return lambda z: sps.t.pdf(z / s, nu) / s
    raise TailIndexError(f"unknown innovation '{innovation}' (gaussian or t)")


def growth_moment(k: float, alpha1: float, beta1: float,
                  innovation: str = "gaussian", nu: float | None = None) -> float:
    """E[(alpha1 Z^2 + beta1)^k] by adaptive quadrature (even integrand)."""
    pdf = _innovation_pdf(innovation, nu)

    def integrand(z):
        return math.exp(k * math.log(alpha1 * z * z + beta1)) * pdf(z)

    val, _ = integrate.quad(integrand, 0.0, np.inf, limit=200)
    return 2.0 * val


def garch_tail_index(alpha1: float, beta1: float,
                     innovation: str = "gaussian",
                     nu: float | None = None, *, k_max: float = 50.0,
                     tol: float = 1e-8) -> float:
    """Positive root of E[(alpha1 Z^2 + beta1)^k] = 1.

    k = 0 is always a root and is excluded; under second-order stationarity
    the expectation is convex in k with negative slope at 0, so the positive
    root is unique.  For Student-t innovations the moment diverges at
    k = nu/2, which naturally caps the search.
    """
    if not (alpha1 > 0 and beta1 >= 0):
        raise TailIndexError(f"need alpha1 > 0 and beta1 >= 0, got "
                             f"({alpha1}, {beta1})")
    if alpha1 + beta1 > 1.0 + 1e-12:
        raise TailIndexError(
            f"alpha1 + beta1 = {alpha1 + beta1} exceeds the stationarity bound")
    if innovation == "t":
        _innovation_pdf(innovation, nu)
        k_max = min(k_max, nu / 2.0 - 1e-6)

    def g(k):
        try:
            return growth_moment(k, alpha1, beta1, innovation, nu) - 1.0
        except (OverflowError, integrate.IntegrationWarning):
            return float("inf")

    lo = min(1e-3, k_max / 10.0)
    g_lo = g(lo)
    if g_lo >= 0.0:
        # E[ln(a1 Z^2 + b1)] < ln E[...] <= 0 under stationarity, so the
        # moment must dip below 1 near k = 0
        raise TailIndexError("no decreasing region near k = 0")
    hi = lo
    g_hi = g_lo
    while g_hi < 0.0:
        if hi >= k_max:
            raise TailIndexError("tail index out of range (no root below "
                                 f"{k_max})")
        hi = min(hi * 1.8 + 0.1, k_max)
        g_hi = g(hi)
        if not np.isfinite(g_hi):
            g_hi = float("inf")
    if not np.isfinite(g_hi):
        # bisect toward the divergence point to find a finite positive value
        a, b = lo, hi
        for _ in range(80):
            m = 0.5 * (a + b)
            gm = g(m)
            if np.isfinite(gm) and gm < 0:
                a = m
            else:
                b = m
                if np.isfinite(gm):
                    return float(optimize.brentq(g, a, b, xtol=tol))
        raise TailIndexError("tail index out of range (moment diverges)")
    return float(optimize.brentq(g, lo, hi, xtol=tol))


def empirical_tail_index(r, threshold_quantile: float):
    """Log-log least-squares fit of P(|X| > x) ~ c x^(-2k*) on one tail.

    threshold_quantile 0.05 selects |X| for X below the 5% quantile (left
    tail); 0.95 selects X above the 95% quantile (right tail).  Returns
    (k_star, c).
    """
    x = np.asarray(getattr(r, "values", r), dtype=float)
    n = len(x)
    if threshold_quantile not in (0.05, 0.95):
        raise TailIndexError("threshold_quantile must be 0.05 or 0.95")
    thr = float(np.quantile(x, threshold_quantile))
    if threshold_quantile == 0.05:
        exceed = -x[x < thr]
    else:
        exceed = x[x > thr]
    m = len(exceed)
    if m < 30:
        raise TailIndexError(f"only {m} exceedances, need >= 30")
    if np.any(exceed <= 0):
        raise TailIndexError("tail magnitudes must be positive for a log fit")
    exceed = np.sort(exceed)
    # survival within the full sample, continuity-corrected to avoid log(0)
    surv = (m - np.arange(1, m + 1) + 0.5) / n
    slope, intercept = np.polyfit(np.log(exceed), np.log(surv), 1)
    k_star = -slope / 2.0
    if k_star <= 0:
        raise TailIndexError(f"fitted tail index {k_star} not positive")
    return float(k_star), float(math.exp(intercept))


def tail_comparison(k: float, k_star: float,
                    side_quantile: float = 0.05) -> TailIndexResult:
    """Pair a model-implied index with an empirical one; log deviation in
    natural-log units (printed as percent)."""
    if not (k > 0 and k_star > 0):
        raise TailIndexError("both indices must be positive")
    return TailIndexResult(k, k_star, side_quantile, math.log(k / k_star))
