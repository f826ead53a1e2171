"""Deterministic report rendering: one file per table plus a detail file.

Numbers carry fixed precision (percentages two decimals, statistics four),
so identical bundles render byte-identically.
"""
from __future__ import annotations

import os

import numpy as np


class ReportError(RuntimeError):
    pass


def _fmt(x, kind):
    if x == "" or x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if kind == "pct":
        return f"{100.0 * x:.2f}%"
    if kind == "stat":
        return f"{x:.4f}"
    if kind == "f2":
        return f"{x:.2f}"
    if kind == "f6":
        return f"{x:.6f}"
    return str(x)


def _write_table(path, header, rows, fmt):
    if fmt == "csv":
        lines = [",".join(header)]
        lines += [",".join(r) for r in rows]
    else:
        widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
                  for i, h in enumerate(header)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths))
                  for r in rows]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def render_report(bundle, out_dir=None, fmt=None):
    """Write descriptive, adequacy, violation, tail-index and detail files.

    Returns the list of written paths.
    """
    cfg = bundle.config
    out_dir = out_dir or cfg.out_dir
    fmt = fmt or cfg.report_format
    if fmt not in ("csv", "table"):
        raise ReportError(f"unknown format '{fmt}'")
    if not bundle.cells:
        raise ReportError("empty bundle: no model cells to report")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create output directory: {exc}") from exc
    ext = "csv" if fmt == "csv" else "txt"
    paths = []

    # descriptive statistics (moments, quantiles, diagnostics per period)
    periods = list(bundle.descriptive)
    stat_rows = [
        ("mean_pct", lambda s: f"{100.0 * s.mean:.3f}%"),
        ("std_dev", lambda s: _fmt(s.std_dev, "stat")),
        ("minimum", lambda s: _fmt(s.minimum, "stat")),
        ("maximum", lambda s: _fmt(s.maximum, "stat")),
        ("skewness", lambda s: _fmt(s.skewness, "stat")),
        ("kurtosis", lambda s: _fmt(s.kurtosis, "stat")),
        ("quantile_1", lambda s: _fmt(s.quantiles[0.01], "stat")),
        ("quantile_5", lambda s: _fmt(s.quantiles[0.05], "stat")),
        ("quantile_95", lambda s: _fmt(s.quantiles[0.95], "stat")),
        ("quantile_99", lambda s: _fmt(s.quantiles[0.99], "stat")),
        ("jb_pvalue", lambda s: _fmt(s.jarque_bera_pvalue, "stat")),
        ("Q10", lambda s: _fmt(s.ljung_box[0][1], "stat")),
        ("pvQ10", lambda s: _fmt(s.ljung_box[0][2], "stat")),
        ("Q20", lambda s: _fmt(s.ljung_box[1][1], "stat")),
        ("pvQ20", lambda s: _fmt(s.ljung_box[1][2], "stat")),
        ("observations", lambda s: str(s.n_observations)),
    ]
    rows = [[name] + [f(bundle.descriptive[p]) for p in periods]
            for name, f in stat_rows]
    paths.append(_write_table(os.path.join(out_dir, f"descriptive.{ext}"),
                              ["statistic"] + periods, rows, fmt))

    # adequacy summaries (VaR and ES)
    for name, df in (("adequacy_var", bundle.adequacy),
                     ("adequacy_es", bundle.adequacy_es)):
        rows = [[r["model"], str(r["GT"]), f"{r['pct_GT']:.2f}",
                 str(r["GTL"]), f"{r['pct_GTL']:.2f}",
                 str(r["GTR"]), f"{r['pct_GTR']:.2f}",
                 str(r["cells"]), str(r["unavailable"])]
                for _, r in df.iterrows()]
        paths.append(_write_table(
            os.path.join(out_dir, f"{name}.{ext}"),
            ["model", "GT", "pct_GT", "GTL", "pct_GTL", "GTR", "pct_GTR",
             "cells", "unavailable"], rows, fmt))

    # violation / deviation accounting
    rows = []
    for _, r in bundle.violations.iterrows():
        rows.append([r["model"],
                     "" if r["level"] == "" else f"{float(r['level']):g}",
                     "" if r["expected"] == "" else _fmt(float(r["expected"]), "f2"),
                     "" if r["failures"] == "" else str(int(r["failures"])),
                     _fmt(float(r["deviation"]), "pct")])
    paths.append(_write_table(
        os.path.join(out_dir, f"violations.{ext}"),
        ["model", "level", "expected", "failures", "deviation"], rows, fmt))

    # tail-index comparison
    rows = [[f"{r['side_quantile']:g}", _fmt(r["k_garch"], "stat"),
             _fmt(r["k_empirical"], "stat"), _fmt(r["log_ratio"], "pct")]
            for _, r in bundle.tail_index.iterrows()]
    paths.append(_write_table(
        os.path.join(out_dir, f"tailindex.{ext}"),
        ["side_quantile", "k_garch", "k_empirical", "log_ratio"], rows, fmt))

    # per-test detail
    rows = []
    for c in bundle.cells:
        if not c.available:
            rows.append([c.model, f"{c.level:g}", c.side, "unavailable",
                         "", "", "", c.reason])
            continue
        for t in c.var_tests + [c.fisher, c.un_normal, c.un_t]:
            rows.append([c.model, f"{c.level:g}", c.side, t.test_name,
                         _fmt(t.statistic, "stat"), _fmt(t.p_value, "stat"),
                         "reject" if t.reject_at_1pct else "accept", ""])
        rows.append([c.model, f"{c.level:g}", c.side, "UN-consistency",
                     "", "", c.un_consistency, ""])
    for (model, side), t in sorted(bundle.tail_fisher.items()):
        rows.append([model, "", side, "Fisher-tail",
                     _fmt(t.statistic, "stat"), _fmt(t.p_value, "stat"),
                     "reject" if t.reject_at_1pct else "accept", ""])
    paths.append(_write_table(
        os.path.join(out_dir, f"tests_detail.{ext}"),
        ["model", "level", "side", "test", "statistic", "p_value",
         "verdict", "note"], rows, fmt))

    # forecast panel
    rows = [[r["date"], r["model"], f"{r['level']:g}", r["side"],
             _fmt(r["var"], "f6"), _fmt(r["es"], "f6"),
             _fmt(r["realized"], "f6"), "1" if r["hit"] else "0"]
            for _, r in bundle.panel.iterrows()]
    paths.append(_write_table(
        os.path.join(out_dir, f"forecasts.{ext}"),
        ["date", "model", "level", "side", "var", "es", "realized", "hit"],
        rows, fmt))
    return paths
