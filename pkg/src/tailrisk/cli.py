"""Command-line interface.

Subcommands: stats (descriptive table), backtest (full pipeline),
tailindex (model-implied vs empirical tail index), simulate (synthetic
series for testing).  Exit codes: 0 success, 1 validation error, 2 runtime
failure.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import engine, garch, reports, series, tails


def _add_input_args(p):
    p.add_argument("--input", required=True, help="delimited price file")
    p.add_argument("--date-col", default="date")
    p.add_argument("--price-col", default="price")
    p.add_argument("--roll-col", default=None)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="tailrisk",
        description="One-day-ahead VaR/ES forecasting and backtesting for "
                    "futures return series")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="descriptive statistics of log returns")
    _add_input_args(p)
    p.add_argument("--split", default=None,
                   help="ISO date; adds in/out-of-sample columns")

    p = sub.add_parser("backtest", help="run the full forecasting pipeline")
    p.add_argument("--config", required=True, help="flat key=value config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--models", default=None, help="comma-separated model list")
    p.add_argument("--format", choices=("csv", "table"), default=None)

    p = sub.add_parser("tailindex",
                       help="GARCH-implied vs empirical power-law tail index")
    _add_input_args(p)
    p.add_argument("--seed", type=int, default=20080102)

    p = sub.add_parser("simulate", help="write a synthetic price series")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--n", type=int, default=2500, help="number of prices")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--phi1", type=float, default=0.05)
    p.add_argument("--persistence", type=float, default=0.97)
    p.add_argument("--arch", type=float, default=0.08,
                   help="squared-innovation coefficient")
    p.add_argument("--daily-vol", type=float, default=0.02)
    p.add_argument("--nu", type=float, default=6.0)
    return ap


def _load_returns(args):
    price = series.load_price_series(args.input, date_col=args.date_col,
                                     price_col=args.price_col,
                                     roll_col=args.roll_col)
    return series.compute_returns(price)


def _print_stats(label, s):
    print(f"-- {label} --")
    print(f"mean            {100 * s.mean:+.3f}%")
    print(f"std dev         {s.std_dev:.4f}")
    print(f"min / max       {s.minimum:.4f} / {s.maximum:.4f}")
    print(f"skewness        {s.skewness:.3f}")
    print(f"kurtosis        {s.kurtosis:.3f}")
    for q in (0.01, 0.05, 0.95, 0.99):
        print(f"quantile {100 * q:>4.0f}%  {s.quantiles[q]:+.4f}")
    print(f"JB p-value      {s.jarque_bera_pvalue:.4f}")
    for lag, q, pv in s.ljung_box:
        print(f"Ljung-Box {lag:>2}    Q={q:.3f}  p={pv:.4f}")
    print(f"observations    {s.n_observations}")


def cmd_stats(args):
    import datetime as dt
    r = _load_returns(args)
    _print_stats("full sample", series.descriptive_stats(r))
    if args.split:
        ins, out = series.split_sample(r, dt.date.fromisoformat(args.split))
        _print_stats("in-sample", series.descriptive_stats(ins))
        _print_stats("out-of-sample", series.descriptive_stats(out))
    return 0


def cmd_backtest(args):
    from dataclasses import replace
    cfg = engine.parse_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.models is not None:
        overrides["models"] = tuple(
            s.strip() for s in args.models.split(",") if s.strip())
    if args.format is not None:
        overrides["report_format"] = args.format
    if overrides:
        cfg = replace(cfg, **overrides).validate()
    bundle = engine.run_backtest(cfg)
    paths = reports.render_report(bundle)
    for ev in bundle.events:
        print(f"note: {ev}", file=sys.stderr)
    for p in paths:
        print(p)
    return 0


def cmd_tailindex(args):
    r = _load_returns(args)
    m = garch.fit(r, "GARCH", seed=args.seed, compute_se=False)
    _, w1, w2 = m.params.variance_params
    k = tails.garch_tail_index(w2, w1, "t", m.params.nu)
    print("side_quantile  k_garch  k_empirical  log_ratio")
    for thr in (0.05, 0.95):
        k_star, _ = tails.empirical_tail_index(r, thr)
        cmp_ = tails.tail_comparison(k, k_star, thr)
        print(f"{thr:<13g}  {cmp_.k_garch:.4f}   {cmp_.k_empirical:.4f}"
              f"       {100 * cmp_.log_ratio:.2f}%")
    return 0


def cmd_simulate(args):
    pers = args.persistence
    if not 0.0 < args.arch < pers < 1.0:
        raise engine.ConfigError(
            "need 0 < arch < persistence < 1 for a stationary model")
    var_target = args.daily_vol ** 2
    w2 = args.arch
    w1 = pers - w2
    w0 = var_target * (1.0 - pers)
    params = garch.GarchParams(0.0, args.phi1, (w0, w1, w2), args.nu)
    r = garch.simulate(params, "GARCH", args.n - 1, seed=args.seed)
    prices = 100.0 * np.exp(np.cumsum(np.concatenate([[0.0], r.values])))
    dates = np.datetime64("2008-01-02", "D") + np.arange(args.n)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("date,price\n")
        for d, p in zip(dates, prices):
            fh.write(f"{d},{p:.6f}\n")
    print(args.out)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"stats": cmd_stats, "backtest": cmd_backtest,
                "tailindex": cmd_tailindex, "simulate": cmd_simulate}
    try:
        return handlers[args.command](args)
    except (series.SeriesError, engine.ConfigError, garch.GarchError,
            tails.TailIndexError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (engine.EngineError, reports.ReportError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
