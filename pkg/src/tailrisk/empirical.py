"""Non-parametric and regression-based VaR forecasters.

Historical Simulation over a fixed rolling window, exponentially weighted
quantile estimation (decaying observation weights), and pinball-loss quantile
regression on fuel-price and backward-looking volatility regressors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.optimize import linprog

from .series import ReturnSeries


class EmpiricalError(ValueError):
    pass


def _values(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, ReturnSeries) else x, dtype=float)


def weighted_quantile(values: np.ndarray, weights: np.ndarray, alpha: float,
                      *, interpolate: bool = False) -> float:
    """Quantile of a weighted sample.

    Default rule: sort ascending, accumulate weights, return the first value
    whose cumulative weight reaches alpha.  With ``interpolate=True`` the
    plotting positions (cumweight - own weight) / (1 - last sorted weight)
    are linearly interpolated, which reduces to the type-7 quantile under
    uniform weights.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if len(values) != len(weights) or len(values) == 0:
        raise EmpiricalError("values and weights must be non-empty and aligned")
    if np.any(weights < 0):
        raise EmpiricalError("weights must be non-negative")
    total = weights.sum()
    if not np.isclose(total, 1.0, atol=1e-12):
        weights = weights / total
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    if not interpolate:
        idx = int(np.searchsorted(cum, alpha, side="left"))
        return float(v[min(idx, len(v) - 1)])
    if len(v) == 1:
        return float(v[0])
    pos = (cum - w) / (1.0 - w[-1])
    return float(np.interp(alpha, pos, v))


def hs_var(window, alpha: float, *, window_size: int = 250,
           interpolate: bool = True) -> float:
    """Historical-simulation VaR: empirical quantile of the last window.

    Uses the most recent ``window_size`` returns; type-7 interpolation by
    default.
    """
    x = _values(window)
    if not 0.0 < alpha < 1.0:
        raise EmpiricalError(f"alpha must be in (0,1), got {alpha}")
    if len(x) < window_size:
        raise EmpiricalError(
            f"window has {len(x)} observations, need {window_size}")
    x = x[-window_size:]
    if interpolate:
        return float(np.quantile(x, alpha))
    return weighted_quantile(x, np.full(len(x), 1.0 / len(x)), alpha)


def ewqr_var(history, alpha: float, lam: float, *,
             interpolate: bool = False) -> float:
    """Exponentially weighted quantile: weight of the i-th most recent
    return is proportional to lam**(i-1)."""
    x = _values(history)
    if len(x) == 0:
        raise EmpiricalError("history is empty")
    if not 0.0 < lam <= 1.0:
        raise EmpiricalError(f"lambda must be in (0,1], got {lam}")
    if not 0.0 < alpha < 1.0:
        raise EmpiricalError(f"alpha must be in (0,1), got {alpha}")
    n = len(x)
    # most recent observation is the last element
    w = lam ** np.arange(n - 1, -1, -1, dtype=float)
    w /= w.sum()
    return weighted_quantile(x, w, alpha, interpolate=interpolate)


VOL_WINDOWS = {"daily": 1, "weekly": 5, "monthly": 21}


def build_vol_regressors(r):
    """Strictly backward-looking volatility columns.

    Row j (into the input) gets |r_{j-1}|, std(r_{j-5..j-1}) and
    std(r_{j-21..j-1}); the first 21 rows lack history and are dropped.
    Returns (row_indices, matrix with columns daily/weekly/monthly).
    """
    x = _values(r)
    warm = max(VOL_WINDOWS.values())
    if len(x) < warm + 1:
        raise EmpiricalError(f"need >= {warm + 1} observations, got {len(x)}")
    idx = np.arange(warm, len(x))
    daily = np.abs(x[idx - 1])
    weekly = np.array([np.std(x[j - 5:j], ddof=1) for j in idx])
    monthly = np.array([np.std(x[j - 21:j], ddof=1) for j in idx])
    return idx, np.column_stack([daily, weekly, monthly])


@dataclass(frozen=True)
class QrDesign:
    """Response returns with aligned regressor matrix."""

    response: np.ndarray
    regressors: np.ndarray
    names: tuple

    def __post_init__(self):
        y = np.asarray(self.response, dtype=float)
        X = np.atleast_2d(np.asarray(self.regressors, dtype=float))
        if X.shape[0] != len(y):
            raise EmpiricalError("regressor rows must match response length")
        if X.shape[1] != len(self.names):
            raise EmpiricalError("names must match regressor columns")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise EmpiricalError("design contains missing or non-finite cells")
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "regressors", X)


@dataclass(frozen=True)
class QrFit:
    alpha: float
    intercept: float
    coefficients: tuple
    pinball_loss: float


def pinball_loss(u: np.ndarray, alpha: float) -> float:
    u = np.asarray(u, dtype=float)
    return float(np.sum(u * (alpha - (u < 0))))


def qr_fit(d: QrDesign, alpha: float) -> QrFit:
    """Linear quantile regression by LP minimization of the check loss."""
    if not 0.0 < alpha < 1.0:
        raise EmpiricalError(f"alpha must be in (0,1), got {alpha}")
    y = d.response
    X = np.column_stack([np.ones(len(y)), d.regressors])
    n, p = X.shape
    if n < 10 * p:
        raise EmpiricalError(f"need >= {10 * p} rows for {p - 1} regressors, got {n}")
    if np.linalg.matrix_rank(X) < p:
        _, R, piv = linalg.qr(X, pivoting=True, mode="economic")
        tol = abs(R[0, 0]) * max(n, p) * np.finfo(float).eps
        dead = sorted(piv[np.flatnonzero(np.abs(np.diag(R)) <= tol)])
        labels = ["intercept"] + list(d.names)
        raise EmpiricalError(
            "rank-deficient design; collinear columns: "
            + ", ".join(labels[i] for i in dead))
    # min  alpha*1'u+ + (1-alpha)*1'u-   s.t.  X b + u+ - u- = y
    c = np.concatenate([np.zeros(p), np.full(n, alpha), np.full(n, 1.0 - alpha)])
    A_eq = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs")
    if not res.success:
        raise EmpiricalError(f"quantile regression LP failed: {res.message}")
    beta = res.x[:p]
    fitted = X @ beta
    return QrFit(alpha=alpha, intercept=float(beta[0]),
                 coefficients=tuple(map(float, beta[1:])),
                 pinball_loss=pinball_loss(y - fitted, alpha))


def qr_predict(f: QrFit, row) -> float:
    row = np.asarray(row, dtype=float)
    if row.shape != (len(f.coefficients),):
        raise EmpiricalError(
            f"regressor row has {row.shape} entries, fit expects "
            f"{len(f.coefficients)}")
    return float(f.intercept + np.dot(f.coefficients, row))
