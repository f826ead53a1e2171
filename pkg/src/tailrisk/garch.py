"""AR(1)-GARCH/EGARCH/GJR models with standardized Student-t innovations.

Conventions
-----------
Observations are indexed 0..T-1.  The mean equation needs one lagged return,
so the likelihood runs over observations 1..T-1 with

    mu_t    = phi0 + phi1 * r_{t-1}
    a_t     = r_t - mu_t                     (un-standardized residual)
    eps_t   = a_t / sigma_t                  (standardized residual)

The innovation is Student-t with nu degrees of freedom rescaled to unit
variance, i.e. density scale sigma_t * sqrt((nu-2)/nu).

Variance recursions (coefficient ordering of the parameter vector):
    GARCH  (w0, w1, w2):        sigma2_t = w0 + w1*sigma2_{t-1} + w2*a_{t-1}^2
    EGARCH (b0, b1, b2, b3):    ln sigma2_t = b0 + b1*eps_{t-1}
                                  + b2*ln sigma2_{t-1}
                                  + b3*(|eps_{t-1}| - E|eps|)
    GJR    (k0, k1, k2, k3):    sigma2_t = k0 + k1*a_{t-1}^2
                                  + k2*1(a_{t-1}<0)*a_{t-1}^2
                                  + k3*sigma2_{t-1}

GARCH/GJR feed the raw residual into the recursion and EGARCH the
standardized one (the McNeil-Frey convention).  The first conditional
variance is set to the model-implied unconditional variance, which makes the
degenerate recursions collapse exactly to their iid counterparts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy import optimize
from scipy import stats as sps
from scipy.special import gammaln

from .series import ReturnSeries

VARIANTS = ("GARCH", "EGARCH", "GJR")

NU_CAP = 200.0


class GarchError(ValueError):
    """Invalid parameters or inputs for a GARCH-family model."""


class EvaluationError(GarchError):
    """Likelihood or filter evaluation failed (variance under/overflow)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonConvergenceError(GarchError):
    """All optimization starts failed; carries the best parameters found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class GarchParams:
    """Mean, variance and tail parameters of one model variant."""

    phi0: float
    phi1: float
    variance_params: tuple
    nu: float

    def validate(self, variant: str) -> None:
        if variant not in VARIANTS:
            raise GarchError(f"unknown variant '{variant}'")
        if not abs(self.phi1) < 1:
            raise GarchError(f"|phi1| must be < 1, got {self.phi1}")
        if not self.nu > 2:
            raise GarchError(f"nu must be > 2, got {self.nu}")
        vp = self.variance_params
        if variant == "GARCH":
            w0, w1, w2 = vp
            if not (w0 > 0 and w1 >= 0 and w2 >= 0 and w1 + w2 < 1):
                raise GarchError(f"invalid GARCH coefficients {vp}")
        elif variant == "EGARCH":
            _, _, b2, _ = vp
            if not abs(b2) < 1:
                raise GarchError(f"|b2| must be < 1, got {b2}")
        else:
            k0, k1, k2, k3 = vp
            if not (k0 > 0 and k1 >= 0 and k3 >= 0
                    and k1 + 0.5 * k2 + k3 < 1 and k1 + k2 >= 0):
                raise GarchError(f"invalid GJR coefficients {vp}")


@dataclass(frozen=True)
class CondMoments:
    """One-step-ahead conditional mean and standard deviation."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise GarchError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class FittedModel:
    variant: str
    params: GarchParams
    log_likelihood: float
    converged: bool
    last_state: tuple          # (last_return, last_conditional_variance, last_residual)
    standard_errors: tuple
    gaussian_limit: bool = False

    def to_record(self) -> str:
        """Flat key-value text record for report reproducibility."""
        names = param_names(self.variant)
        values = _param_vector(self.params)
        lines = [f"variant = {self.variant}"]
        lines += [f"{n} = {v!r}" for n, v in zip(names, values)]
        lines.append(f"log_likelihood = {self.log_likelihood!r}")
        lines.append(f"converged = {self.converged}")
        return "\n".join(lines) + "\n"


def param_names(variant: str):
    base = {"GARCH": ("w0", "w1", "w2"),
            "EGARCH": ("b0", "b1", "b2", "b3"),
            "GJR": ("k0", "k1", "k2", "k3")}[variant]
    return ("phi0", "phi1") + base + ("nu",)


def _param_vector(p: GarchParams) -> np.ndarray:
    return np.array([p.phi0, p.phi1, *p.variance_params, p.nu], dtype=float)


def abs_moment_std_t(nu: float) -> float:
    """E|Z| for the unit-variance Student-t innovation."""
    return (2.0 * math.sqrt(nu - 2.0) / (math.sqrt(math.pi) * (nu - 1.0))
            * math.exp(gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0)))


# --- variance recursions (hot loops) ---------------------------------------

@njit(cache=True)
def _rec_garch(a, w0, w1, w2):
    n = a.shape[0]
    sig2 = np.empty(n)
    sig2[0] = w0 / (1.0 - w1 - w2)
    for i in range(1, n):
        sig2[i] = w0 + w1 * sig2[i - 1] + w2 * a[i - 1] * a[i - 1]
    return sig2


@njit(cache=True)
def _rec_gjr(a, k0, k1, k2, k3):
    n = a.shape[0]
    sig2 = np.empty(n)
    sig2[0] = k0 / (1.0 - k3 - k1 - 0.5 * k2)
    for i in range(1, n):
        ap = a[i - 1]
        # ordered to match the GARCH recursion bit-for-bit when k2 = 0
        sig2[i] = k0 + k3 * sig2[i - 1] + k1 * ap * ap
        if ap < 0.0:
            sig2[i] += k2 * ap * ap
    return sig2


@njit(cache=True)
def _rec_egarch(a, b0, b1, b2, b3, abs_mean):
    n = a.shape[0]
    sig2 = np.empty(n)
    ln_s2 = b0 / (1.0 - b2)
    if ln_s2 > 700.0:
        ln_s2 = 700.0
    elif ln_s2 < -700.0:
        ln_s2 = -700.0
    sig2[0] = math.exp(ln_s2)
    for i in range(1, n):
        eps = a[i - 1] / math.sqrt(sig2[i - 1])
        ln_s2 = b0 + b1 * eps + b2 * ln_s2 + b3 * (abs(eps) - abs_mean)
        if ln_s2 > 700.0:
            ln_s2 = 700.0
        elif ln_s2 < -700.0:
            ln_s2 = -700.0
        sig2[i] = math.exp(ln_s2)
    return sig2


@njit(cache=True)
def _sim_path(eps, variant_id, phi0, phi1, v0, v1, v2, v3, abs_mean):
    # variant_id: 0 GARCH, 1 EGARCH, 2 GJR
    n = eps.shape[0]
    r = np.empty(n)
    if variant_id == 0:
        sig2 = v0 / (1.0 - v1 - v2)
    elif variant_id == 2:
        sig2 = v0 / (1.0 - v3 - v1 - 0.5 * v2)
    else:
        sig2 = math.exp(v0 / (1.0 - v2))
    ln_s2 = math.log(sig2)
    r_prev = phi0 / (1.0 - phi1)
    a_prev = 0.0
    eps_prev = 0.0
    first = True
    for i in range(n):
        if not first:
            if variant_id == 0:
                sig2 = v0 + v1 * sig2 + v2 * a_prev * a_prev
            elif variant_id == 2:
                sig2 = v0 + v3 * sig2 + v1 * a_prev * a_prev
                if a_prev < 0.0:
                    sig2 += v2 * a_prev * a_prev
            else:
                ln_s2 = (v0 + v1 * eps_prev + v2 * ln_s2
                         + v3 * (abs(eps_prev) - abs_mean))
                if ln_s2 > 700.0:
                    ln_s2 = 700.0
                sig2 = math.exp(ln_s2)
        first = False
        sig = math.sqrt(sig2)
        a = sig * eps[i]
        r[i] = phi0 + phi1 * r_prev + a
        r_prev = r[i]
        a_prev = a
        eps_prev = eps[i]
    return r


def _variance_path(params: GarchParams, variant: str, a: np.ndarray) -> np.ndarray:
    vp = params.variance_params
    if variant == "GARCH":
        return _rec_garch(a, *vp)
    if variant == "GJR":
        return _rec_gjr(a, *vp)
    return _rec_egarch(a, *vp, abs_moment_std_t(params.nu))


def _residuals(params: GarchParams, r: np.ndarray):
    """(mu, a) for observations 1..T-1."""
    mu = params.phi0 + params.phi1 * r[:-1]
    return mu, r[1:] - mu


def _t_loglik_terms(a, sig2, nu):
    const = (gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0)
             - 0.5 * math.log(math.pi * (nu - 2.0)))
    return (const - 0.5 * np.log(sig2)
            - (nu + 1.0) / 2.0 * np.log1p(a * a / (sig2 * (nu - 2.0))))


def negative_log_likelihood(params: GarchParams, variant: str,
                            r: ReturnSeries) -> float:
    """Exact conditional NLL over observations 1..T-1."""
    params.validate(variant)
    x = np.asarray(r.values if isinstance(r, ReturnSeries) else r, dtype=float)
    if len(x) < 50:
        raise GarchError(f"need >= 50 observations, got {len(x)}")
    _, a = _residuals(params, x)
    sig2 = _variance_path(params, variant, a)
    terms = _t_loglik_terms(a, sig2, params.nu)
    if not np.all(np.isfinite(terms)):
        bad = int(np.flatnonzero(~np.isfinite(terms))[0])
        raise EvaluationError(f"non-finite likelihood at index {bad + 1}", bad + 1)
    return float(-np.sum(terms))


def filter_series(params: GarchParams, variant: str, r: ReturnSeries):
    """Run the mean/variance recursions; returns (mu, sigma, std_resid).

    Arrays are aligned with observations 1..T-1 of the input.
    """
    params.validate(variant)
    x = np.asarray(r.values if isinstance(r, ReturnSeries) else r, dtype=float)
    if len(x) < 2:
        raise GarchError("need >= 2 observations to filter")
    mu, a = _residuals(params, x)
    sig2 = _variance_path(params, variant, a)
    if not np.all(np.isfinite(sig2)) or np.any(sig2 <= 0):
        bad = int(np.flatnonzero(~np.isfinite(sig2) | (sig2 <= 0))[0])
        raise EvaluationError(f"variance path failed at index {bad + 1}", bad + 1)
    sigma = np.sqrt(sig2)
    return mu, sigma, a / sigma


def forecast_one_step(m: FittedModel, *, force: bool = False) -> CondMoments:
    """Conditional moments for the step after the fitting window."""
    if not (m.converged or force):
        raise GarchError("model did not converge; pass force=True to override")
    return _forecast_from_state(m.params, m.variant, m.last_state)


def _forecast_from_state(params: GarchParams, variant: str, state) -> CondMoments:
    last_r, last_s2, last_a = state
    mu = params.phi0 + params.phi1 * last_r
    vp = params.variance_params
    if variant == "GARCH":
        w0, w1, w2 = vp
        s2 = w0 + w1 * last_s2 + w2 * last_a * last_a
    elif variant == "GJR":
        k0, k1, k2, k3 = vp
        s2 = k0 + k3 * last_s2 + k1 * last_a * last_a
        if last_a < 0:
            s2 += k2 * last_a * last_a
    else:
        b0, b1, b2, b3 = vp
        eps = last_a / math.sqrt(last_s2)
        s2 = math.exp(b0 + b1 * eps + b2 * math.log(last_s2)
                      + b3 * (abs(eps) - abs_moment_std_t(params.nu)))
    return CondMoments(float(mu), float(math.sqrt(s2)))


# --- closed-form risk measures ---------------------------------------------

def var_closed_form(cm: CondMoments, nu: float, alpha: float) -> float:
    """Student-t conditional VaR; alpha < 0.5 left tail, >= 0.5 right tail."""
    if not 0.0 < alpha < 1.0:
        raise GarchError(f"alpha must be in (0,1), got {alpha}")
    if not nu > 2:
        raise GarchError(f"nu must be > 2, got {nu}")
    s = math.sqrt((nu - 2.0) / nu)
    return cm.mu + cm.sigma * s * float(sps.t.ppf(alpha, nu))


def es_closed_form(cm: CondMoments, nu: float, alpha: float) -> float:
    """Student-t conditional ES on the tail implied by alpha."""
    if not 0.0 < alpha < 1.0:
        raise GarchError(f"alpha must be in (0,1), got {alpha}")
    if not nu > 2:
        raise GarchError(f"nu must be > 2, got {nu}")
    s = math.sqrt((nu - 2.0) / nu)
    q = float(sps.t.ppf(alpha, nu))
    tail = alpha if alpha < 0.5 else 1.0 - alpha
    # E[T | T < q] = -g(q) (nu + q^2) / ((nu - 1) alpha); mirrored on the right
    mag = float(sps.t.pdf(q, nu)) * (nu + q * q) / ((nu - 1.0) * tail)
    return cm.mu + cm.sigma * s * (-mag if alpha < 0.5 else mag)


def simulate(params: GarchParams, variant: str, n: int, seed: int,
             *, burn: int = 1000) -> ReturnSeries:
    """Simulate a return path; deterministic given seed, burn-in discarded."""
    params.validate(variant)
    rng = np.random.default_rng(seed)
    eps = rng.standard_t(params.nu, size=n + burn) * math.sqrt(
        (params.nu - 2.0) / params.nu)
    vid = {"GARCH": 0, "EGARCH": 1, "GJR": 2}[variant]
    vp = list(params.variance_params) + [0.0] * (4 - len(params.variance_params))
    r = _sim_path(eps, vid, params.phi0, params.phi1, *vp,
                  abs_moment_std_t(params.nu))[burn:]
    dates = np.datetime64("2000-01-01", "D") + np.arange(n)
    return ReturnSeries(dates, r)


# --- maximum likelihood ----------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def _logit(p):
    return math.log(p / (1.0 - p))


def _params_from_u(u: np.ndarray, variant: str) -> GarchParams:
    phi0, phi1 = u[0], math.tanh(u[1])
    nu = 2.0 + math.exp(u[-1])
    if variant == "GARCH":
        w0 = math.exp(u[2])
        pers = _sigmoid(u[3])
        share = _sigmoid(u[4])
        vp = (w0, pers * share, pers * (1.0 - share))
    elif variant == "EGARCH":
        vp = (u[2], u[3], math.tanh(u[4]), u[5])
    else:
        k0 = math.exp(u[2])
        pers = _sigmoid(u[3])
        w = np.exp(np.array([u[4], u[5], 0.0]))
        w /= w.sum()
        vp = (k0, pers * w[0], 2.0 * pers * w[1], pers * w[2])
    return GarchParams(float(phi0), float(phi1), tuple(map(float, vp)), float(nu))


def _u_from_params(p: GarchParams, variant: str) -> np.ndarray:
    clip = lambda x: min(max(x, 1e-8), 1 - 1e-8)
    head = [p.phi0, math.atanh(max(min(p.phi1, 0.999), -0.999))]
    tail = [math.log(max(p.nu - 2.0, 1e-6))]
    vp = p.variance_params
    if variant == "GARCH":
        w0, w1, w2 = vp
        pers = clip(w1 + w2)
        share = clip(w1 / pers if pers > 0 else 0.5)
        mid = [math.log(w0), _logit(pers), _logit(share)]
    elif variant == "EGARCH":
        b0, b1, b2, b3 = vp
        mid = [b0, b1, math.atanh(max(min(b2, 0.999), -0.999)), b3]
    else:
        k0, k1, k2, k3 = vp
        pers = clip(k1 + 0.5 * k2 + k3)
        s = np.array([clip(k1 / pers), clip(0.5 * k2 / pers), clip(k3 / pers)])
        s /= s.sum()
        mid = [math.log(k0), _logit(pers),
               math.log(s[0] / s[2]), math.log(s[1] / s[2])]
    return np.array(head + mid + tail, dtype=float)


def _moment_starts(x: np.ndarray, variant: str, n_starts: int, seed: int):
    """Method-of-moments anchors perturbed per start."""
    rng = np.random.default_rng(seed)
    xc = x - x.mean()
    phi1 = float(np.dot(xc[1:], xc[:-1]) / np.dot(xc, xc))
    phi1 = max(min(phi1, 0.9), -0.9)
    phi0 = float(x.mean() * (1.0 - phi1))
    v = float(np.var(x, ddof=1)) * (1.0 - phi1 * phi1)
    anchors = [(0.94, 0.90, 6.0), (0.85, 0.80, 8.0), (0.98, 0.93, 5.0),
               (0.60, 0.70, 10.0), (0.40, 0.50, 7.0)]
    starts = []
    for i in range(n_starts):
        pers, share, nu = anchors[i % len(anchors)]
        if i >= len(anchors):
            pers = min(max(pers + rng.normal(0, 0.05), 0.05), 0.995)
            share = min(max(share + rng.normal(0, 0.1), 0.05), 0.95)
        if variant == "GARCH":
            vp = (v * (1.0 - pers), pers * share, pers * (1.0 - share))
        elif variant == "EGARCH":
            vp = (math.log(v) * (1.0 - pers), 0.0, pers, 0.1)
        else:
            alpha = pers * (1.0 - share)
            vp = (v * (1.0 - pers), alpha * 0.75, alpha * 0.5, pers * share)
        p = GarchParams(phi0, phi1, vp, nu)
        u = _u_from_params(p, variant)
        if i > 0:
            u = u + rng.normal(0, 0.05, size=u.shape)
            u[0] = phi0
        starts.append(u)
    return starts


def _fd_gradient(f, u, h=1e-5):
    g = np.zeros_like(u)
    for i in range(len(u)):
        e = np.zeros_like(u)
        e[i] = h * (1.0 + abs(u[i]))
        g[i] = (f(u + e) - f(u - e)) / (2.0 * e[i])
    return g


def _fd_hessian(f, u, h=1e-4):
    n = len(u)
    H = np.zeros((n, n))
    hs = h * (1.0 + np.abs(u))
    f0 = f(u)
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n); ei[i] = hs[i]
            ej = np.zeros(n); ej[j] = hs[j]
            if i == j:
                H[i, i] = (f(u + ei) - 2.0 * f0 + f(u - ei)) / hs[i] ** 2
            else:
                H[i, j] = H[j, i] = (
                    f(u + ei + ej) - f(u + ei - ej)
                    - f(u - ei + ej) + f(u - ei - ej)
                ) / (4.0 * hs[i] * hs[j])
    return H


def _standard_errors(nll_u, u_opt, variant):
    """Delta-method SEs: transformed-space Hessian mapped to raw parameters."""
    H = _fd_hessian(nll_u, u_opt)
    try:
        cov_u = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        cov_u = np.linalg.pinv(H)
    n = len(u_opt)
    J = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1e-6 * (1.0 + abs(u_opt[j]))
        hi = _param_vector(_params_from_u(u_opt + e, variant))
        lo = _param_vector(_params_from_u(u_opt - e, variant))
        J[:, j] = (hi - lo) / (2.0 * e[j])
    cov = J @ cov_u @ J.T
    d = np.diag(cov).copy()
    d[d < 0] = np.nan
    return tuple(np.sqrt(d))


def fit(r: ReturnSeries, variant: str, *, n_starts: int = 5,
        seed: int = 0, compute_se: bool = True) -> FittedModel:
    """Multi-start MLE under the stationarity/positivity constraints."""
    if variant not in VARIANTS:
        raise GarchError(f"unknown variant '{variant}'")
    x = np.asarray(r.values if isinstance(r, ReturnSeries) else r, dtype=float)
    if len(x) < 250:
        raise GarchError(f"need >= 250 observations to fit, got {len(x)}")
    if float(np.std(x)) == 0.0:
        raise GarchError("degenerate (constant) series")

    def nll_u(u):
        try:
            p = _params_from_u(u, variant)
            p.validate(variant)
            return negative_log_likelihood(p, variant, x)
        except (GarchError, OverflowError, FloatingPointError,
                ZeroDivisionError):
            return 1e10

    best = None
    for u0 in _moment_starts(x, variant, n_starts, seed):
        res = optimize.minimize(nll_u, u0, method="L-BFGS-B",
                                options={"maxiter": 500, "ftol": 1e-11,
                                         "gtol": 1e-7})
        if not np.isfinite(res.fun) or res.fun >= 1e10:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise NonConvergenceError("all optimization starts failed", best=None)

    u_opt = best.x
    params = _params_from_u(u_opt, variant)
    grad = _fd_gradient(nll_u, u_opt)
    converged = bool(np.max(np.abs(grad)) < 1e-3 * (1.0 + abs(best.fun)))
    gaussian_limit = params.nu > NU_CAP
    if gaussian_limit:
        params = replace(params, nu=NU_CAP)

    mu, sigma, _ = filter_series(params, variant, x)
    a = x[1:] - mu
    last_state = (float(x[-1]), float(sigma[-1] ** 2), float(a[-1]))
    se = _standard_errors(nll_u, u_opt, variant) if compute_se else \
        tuple([float("nan")] * len(u_opt))
    return FittedModel(variant=variant, params=params,
                       log_likelihood=float(-best.fun), converged=converged,
                       last_state=last_state, standard_errors=se,
                       gaussian_limit=gaussian_limit)
