"""Pipeline orchestration: rolling one-step-ahead forecasts for every model,
the full backtest battery, and report assembly.

Every forecast for date t uses data through t-1 only.  GARCH-family and
quantile-regression parameters are re-estimated on a configurable cadence
with an expanding window; HS and EWQR use their rolling/expanding windows
daily.  Runs are deterministic given the root seed.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from . import backtests, empirical, es_integral, garch, series, tails

MODELS = ("HS", "EWQR", "GARCH", "EGARCH", "GJR", "QR-COM")
GARCH_FAMILY = {"GARCH", "EGARCH", "GJR"}
DEFAULT_LEVELS = (0.01, 0.05, 0.95, 0.99)


class ConfigError(ValueError):
    pass


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    price_file: str
    split_date: dt.date
    fuel_file: str | None = None
    date_column: str = "date"
    price_column: str = "price"
    roll_column: str | None = None
    models: tuple = MODELS
    levels: tuple = DEFAULT_LEVELS
    hs_window: int = 250
    ewqr_lambda: float = 0.97
    refit_every: int = 20
    dq_lags: int = 4
    seed: int = 20080102
    un_sims: int = 50000
    out_dir: str = "tailrisk_out"
    report_format: str = "csv"

    def validate(self):
        if not self.models:
            raise ConfigError("at least one model is required")
        for m in self.models:
            if m not in MODELS:
                raise ConfigError(f"unknown model '{m}' (choose from {MODELS})")
        for q in self.levels:
            if not 0.0 < q < 1.0:
                raise ConfigError(f"quantile level {q} outside (0,1)")
        if self.hs_window < 2:
            raise ConfigError(f"hs_window must be >= 2, got {self.hs_window}")
        if not 0.0 < self.ewqr_lambda <= 1.0:
            raise ConfigError(
                f"ewqr_lambda must be in (0,1], got {self.ewqr_lambda}")
        if self.refit_every < 1:
            raise ConfigError("refit_every must be >= 1")
        if self.report_format not in ("csv", "table"):
            raise ConfigError(
                f"report_format must be csv or table, got {self.report_format}")
        return self


_CONFIG_KEYS = {
    "price_file": str, "fuel_file": str, "split_date": None,
    "date_column": str, "price_column": str, "roll_column": str,
    "models": None, "levels": None, "hs_window": int,
    "ewqr_lambda": float, "refit_every": int, "dq_lags": int,
    "seed": int, "un_sims": int, "out_dir": str, "report_format": str,
}


def parse_config(path) -> RunConfig:
    """Flat key = value text config; '#' starts a comment; unknown keys
    are rejected."""
    kwargs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"line {lineno}: unknown key '{key}'")
            if key == "split_date":
                try:
                    kwargs[key] = dt.date.fromisoformat(value)
                except ValueError:
                    raise ConfigError(
                        f"line {lineno}: invalid split_date '{value}'") from None
            elif key == "models":
                kwargs[key] = tuple(s.strip() for s in value.split(",") if s.strip())
            elif key == "levels":
                try:
                    kwargs[key] = tuple(float(s) for s in value.split(",") if s.strip())
                except ValueError:
                    raise ConfigError(
                        f"line {lineno}: invalid levels '{value}'") from None
            else:
                caster = _CONFIG_KEYS[key]
                try:
                    kwargs[key] = caster(value)
                except ValueError:
                    raise ConfigError(
                        f"line {lineno}: invalid value for '{key}'") from None
    if "price_file" not in kwargs:
        raise ConfigError("missing required key 'price_file'")
    if "split_date" not in kwargs:
        raise ConfigError("missing required key 'split_date'")
    return RunConfig(**kwargs).validate()


@dataclass
class CellOutcome:
    """Availability and test results for one (model, level) cell."""

    model: str
    level: float
    side: str
    available: bool
    reason: str = ""
    var_tests: list = field(default_factory=list)
    fisher: backtests.TestResult | None = None
    un_normal: backtests.TestResult | None = None
    un_t: backtests.TestResult | None = None
    un_consistency: str = ""
    deviation: backtests.DeviationRecord | None = None


@dataclass
class ReportBundle:
    config: RunConfig
    descriptive: dict              # period name -> StatsSummary
    cells: list                    # CellOutcome per (model, level)
    tail_fisher: dict              # (model, side) -> TestResult (per-tail pooling)
    adequacy: pd.DataFrame         # accepted-cell counts per model, VaR
    adequacy_es: pd.DataFrame      # accepted-cell counts per model, ES
    violations: pd.DataFrame       # observed vs expected failures per cell
    tail_index: pd.DataFrame       # implied vs empirical exponent per tail
    panel: pd.DataFrame            # per (date, model, level): VaR, ES, hit
    events: list                   # refit failures and other run notes


def _load_fuel_returns(cfg: RunConfig, price: series.PriceSeries):
    """Log returns of each fuel column aligned on the return dates."""
    df = pd.read_csv(cfg.fuel_file, sep=None, engine="python")
    if cfg.date_column not in df.columns:
        raise ConfigError(
            f"fuel file missing date column '{cfg.date_column}'")
    df[cfg.date_column] = pd.to_datetime(df[cfg.date_column]).values.astype(
        "datetime64[D]")
    df = df.set_index(cfg.date_column).sort_index()
    cols = [c for c in df.columns]
    if not cols:
        raise ConfigError("fuel file has no fuel columns")
    # align on the price calendar; market holidays in the fuel series carry
    # the last available price forward
    aligned = df.reindex(price.dates).ffill()
    if aligned.iloc[0].isna().any():
        raise ConfigError("fuel series starts after the price series")
    logp = np.log(aligned.to_numpy(dtype=float))
    rets = np.diff(logp, axis=0)
    return tuple(cols), rets   # rows align with the return series


def _quantile_forecaster(model, history, cfg):
    """Callable level -> VaR for HS/EWQR given the data before the date."""
    if model == "HS":
        return lambda q: empirical.hs_var(history, q, window_size=cfg.hs_window)
    return lambda q: empirical.ewqr_var(history, q, cfg.ewqr_lambda)


def _rearrange(var_by_level: dict) -> dict:
    """Per-date monotone repair: sort the VaR values across levels."""
    levels = sorted(var_by_level)
    values = np.sort([var_by_level[q] for q in levels])
    return dict(zip(levels, values))


def _forecast_model(model, cfg, returns, price, n_in, node_levels, events):
    """Forecast VaR and ES per out-of-sample date; returns two dicts
    level -> np.ndarray or raises EngineError if the model cannot run."""
    x = returns.values
    n_out = len(x) - n_in
    var = {q: np.empty(n_out) for q in cfg.levels}
    es = {q: np.empty(n_out) for q in cfg.levels}

    if model in GARCH_FAMILY:
        fitted = None
        for t in range(n_out):
            i = n_in + t
            if t % cfg.refit_every == 0:
                try:
                    fitted = garch.fit(
                        series.ReturnSeries(returns.dates[:i], x[:i]),
                        model, seed=cfg.seed, compute_se=False)
                    if not fitted.converged:
                        events.append(
                            f"{model}: refit at step {t} not converged; "
                            "using best-found parameters")
                except garch.GarchError as exc:
                    if fitted is None:
                        raise EngineError(f"{model}: initial fit failed: {exc}")
                    events.append(
                        f"{model}: refit at step {t} failed ({exc}); "
                        "keeping previous parameters")
            params = fitted.params
            _, sigma, _ = garch.filter_series(params, model, x[:i])
            mu_path = params.phi0 + params.phi1 * x[:i][:-1]
            a_last = x[i - 1] - mu_path[-1]
            state = (float(x[i - 1]), float(sigma[-1] ** 2), float(a_last))
            cm = garch._forecast_from_state(params, model, state)
            for q in cfg.levels:
                var[q][t] = garch.var_closed_form(cm, params.nu, q)
                es[q][t] = garch.es_closed_form(cm, params.nu, q)
        return var, es

    if model in ("HS", "EWQR"):
        for t in range(n_out):
            i = n_in + t
            history = x[:i]
            var_at = _quantile_forecaster(model, history, cfg)
            for q in cfg.levels:
                var[q][t] = var_at(q)
                es[q][t] = es_integral.es_discretized(var_at, q)
        return var, es

    # QR-COM
    if cfg.fuel_file is None:
        raise EngineError("QR-COM requires a fuel_file")
    fuel_names, fuel_rets = _load_fuel_returns(cfg, price)
    warm = max(empirical.VOL_WINDOWS.values())
    idx, vol = empirical.build_vol_regressors(x)
    # regressor row for return index j: vols through j-1, fuel returns at j-1
    fuel_lagged = fuel_rets[idx - 1]
    X_all = np.column_stack([vol, fuel_lagged])
    names = tuple(["vol_daily", "vol_weekly", "vol_monthly"]
                  + [f"fuel_{c}" for c in fuel_names])
    fits = None
    for t in range(n_out):
        i = n_in + t
        if t % cfg.refit_every == 0:
            rows = idx < i
            design = empirical.QrDesign(x[idx[rows]], X_all[rows], names)
            try:
                fits = {q: empirical.qr_fit(design, q) for q in node_levels}
            except empirical.EmpiricalError as exc:
                if fits is None:
                    raise EngineError(f"QR-COM: initial fit failed: {exc}")
                events.append(f"QR-COM: refit at step {t} failed ({exc}); "
                              "keeping previous coefficients")
        pos = i - warm
        row = X_all[pos]
        for q in cfg.levels:
            var[q][t] = empirical.qr_predict(fits[q], row)
            es[q][t] = es_integral.es_discretized(
                lambda node: empirical.qr_predict(fits[node], row), q)
    return var, es


def run_backtest(cfg: RunConfig) -> ReportBundle:
    cfg.validate()
    price = series.load_price_series(
        cfg.price_file, date_col=cfg.date_column, price_col=cfg.price_column,
        roll_col=cfg.roll_column)
    returns = series.compute_returns(price)
    in_sample, out_sample = series.split_sample(returns, cfg.split_date)
    if len(out_sample) == 0:
        raise EngineError("out-of-sample period is empty")
    n_in = len(in_sample)
    events: list = []

    descriptive = {
        "full": series.descriptive_stats(returns),
        "in_sample": series.descriptive_stats(in_sample),
        "out_of_sample": series.descriptive_stats(out_sample),
    }

    node_levels = sorted({n for q in cfg.levels
                          for n in es_integral.es_nodes(q)})

    panel_rows = []
    cells: list[CellOutcome] = []
    tail_fisher: dict = {}
    model_forecasts: dict = {}
    for model in cfg.models:
        try:
            var, es = _forecast_model(model, cfg, returns, price, n_in,
                                      node_levels, events)
        except (EngineError, garch.GarchError, empirical.EmpiricalError) as exc:
            events.append(f"{model}: unavailable ({exc})")
            for q in cfg.levels:
                cells.append(CellOutcome(model, q, backtests.side_of(q),
                                         available=False, reason=str(exc)))
            continue
        # monotone repair across levels, date by date
        n_out = len(out_sample)
        for t in range(n_out):
            fixed = _rearrange({q: var[q][t] for q in cfg.levels})
            for q in cfg.levels:
                var[q][t] = fixed[q]
        model_forecasts[model] = (var, es)

        per_tail_ps = {"left": [], "right": []}
        for q in sorted(cfg.levels):
            side = backtests.side_of(q)
            h = backtests.hit_sequence(out_sample.values, var[q], q,
                                       dates=out_sample.dates)
            var_tests = [backtests.bin_test(h), backtests.pof_test(h),
                         backtests.cci_test(h),
                         backtests.dq_test(h, var[q], cfg.dq_lags)]
            fisher = backtests.fisher_combine([t_.p_value for t_ in var_tests])
            per_tail_ps[side].extend(t_.p_value for t_ in var_tests)
            un_n = backtests.un_test(out_sample.values, var[q], es[q], q,
                                     reference="normal", n_sims=cfg.un_sims,
                                     seed=cfg.seed + 1)
            un_t = backtests.un_test(out_sample.values, var[q], es[q], q,
                                     reference="t3", n_sims=cfg.un_sims,
                                     seed=cfg.seed + 1)
            cells.append(CellOutcome(
                model, q, side, available=True, var_tests=var_tests,
                fisher=fisher, un_normal=un_n, un_t=un_t,
                un_consistency=backtests.consistency_check(un_n, un_t),
                deviation=backtests.deviation_record(h)))
            for t in range(n_out):
                panel_rows.append(
                    (str(out_sample.dates[t]), model, q, side,
                     var[q][t], es[q][t], out_sample.values[t],
                     bool(h.hits[t])))
        for side, ps in per_tail_ps.items():
            if ps:
                tail_fisher[(model, side)] = backtests.fisher_combine(ps)

    panel = pd.DataFrame(
        panel_rows,
        columns=["date", "model", "level", "side", "var", "es",
                 "realized", "hit"])

    adequacy = summarize_adequacy(cells, cfg.models, kind="var")
    adequacy_es = summarize_adequacy(cells, cfg.models, kind="es")
    violations = _violation_table(cells, cfg.models)
    tail_table = _tail_index_table(cfg, in_sample, returns, events)

    return ReportBundle(config=cfg, descriptive=descriptive, cells=cells,
                        tail_fisher=tail_fisher, adequacy=adequacy,
                        adequacy_es=adequacy_es, violations=violations,
                        tail_index=tail_table, panel=panel, events=events)


def summarize_adequacy(cells, models, kind="var") -> pd.DataFrame:
    """Counts and percentages of non-rejected cells per model.

    GT covers all cells, GTL the left-tail cells and GTR the right-tail
    cells.  Unavailable cells stay in the denominators.
    """
    rows = []
    for model in models:
        mc = [c for c in cells if c.model == model]
        def _accepted(c):
            if not c.available:
                return False
            if kind == "var":
                return not c.fisher.reject_at_1pct
            return not (c.un_normal.reject_at_1pct or c.un_t.reject_at_1pct)
        gt = sum(_accepted(c) for c in mc)
        gtl = sum(_accepted(c) for c in mc if c.side == "left")
        gtr = sum(_accepted(c) for c in mc if c.side == "right")
        n = len(mc)
        nl = sum(c.side == "left" for c in mc)
        nr = n - nl
        rows.append({
            "model": model, "GT": gt, "pct_GT": gt / n if n else 0.0,
            "GTL": gtl, "pct_GTL": gtl / nl if nl else 0.0,
            "GTR": gtr, "pct_GTR": gtr / nr if nr else 0.0,
            "cells": n, "unavailable": sum(not c.available for c in mc),
        })
    return pd.DataFrame(rows)


def _violation_table(cells, models) -> pd.DataFrame:
    rows = []
    for model in models:
        mc = [c for c in cells if c.model == model and c.available]
        devs = [c.deviation.deviation for c in mc]
        if devs:
            rows.append({"model": model, "level": "",
                         "expected": "", "failures": "",
                         "deviation": float(np.mean(devs))})
        for c in mc:
            rows.append({"model": model, "level": c.level,
                         "expected": c.deviation.expected_failures,
                         "failures": c.deviation.observed_failures,
                         "deviation": c.deviation.deviation})
    return pd.DataFrame(rows,
                        columns=["model", "level", "expected", "failures",
                                 "deviation"])


def _tail_index_table(cfg, in_sample, full, events) -> pd.DataFrame:
    rows = []
    try:
        m = garch.fit(in_sample, "GARCH", seed=cfg.seed, compute_se=False)
        w0, w1, w2 = m.params.variance_params
        # w2 multiplies the squared innovation, w1 the lagged variance
        k = tails.garch_tail_index(w2, w1, "t", m.params.nu)
        for thr in (0.05, 0.95):
            k_star, _ = tails.empirical_tail_index(full, thr)
            cmp_ = tails.tail_comparison(k, k_star, thr)
            rows.append({"side_quantile": thr, "k_garch": cmp_.k_garch,
                         "k_empirical": cmp_.k_empirical,
                         "log_ratio": cmp_.log_ratio})
    except (garch.GarchError, tails.TailIndexError) as exc:
        events.append(f"tail index unavailable ({exc})")
    return pd.DataFrame(rows, columns=["side_quantile", "k_garch",
                                       "k_empirical", "log_ratio"])
