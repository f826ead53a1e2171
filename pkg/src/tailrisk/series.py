"""Continuous futures price series, log returns and descriptive statistics.

Prices arrive as perpetually linked (continuous) series.  On the day the
series switches from the old contract to the fresh one the log return is an
artifact of the linking, so roll days carry a forced zero return.
"""
from __future__ import annotations

import datetime as dt
import io
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats as sps


class SeriesError(ValueError):
    """Malformed or degenerate market data."""


_TRUE = {"1", "true", "True", "TRUE"}
_FALSE = {"0", "false", "False", "FALSE", ""}


@dataclass(frozen=True)
class PriceSeries:
    """Dated continuous futures prices with roll-day flags.

    Dates are strictly increasing and prices strictly positive (log returns
    are taken downstream, so zero prices are rejected).
    """

    dates: np.ndarray          # datetime64[D], strictly increasing
    prices: np.ndarray         # float, > 0
    roll_flags: np.ndarray     # bool, True on the day the contract rolls

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        prices = np.asarray(self.prices, dtype=float)
        rolls = np.asarray(self.roll_flags, dtype=bool)
        if not (len(dates) == len(prices) == len(rolls)):
            raise SeriesError("dates, prices and roll_flags must be aligned")
        if len(dates) > 1 and not np.all(np.diff(dates).astype(int) > 0):
            bad = int(np.argmin(np.diff(dates).astype(int)))
            raise SeriesError(
                f"dates must be strictly increasing; violation near {dates[bad + 1]}"
            )
        bad = np.flatnonzero(~(prices > 0.0) | ~np.isfinite(prices))
        if bad.size:
            raise SeriesError(f"non-positive price at {dates[bad[0]]}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "roll_flags", rolls)

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class ReturnSeries:
    """Dated log returns; exactly zero on every roll day."""

    dates: np.ndarray    # datetime64[D]
    values: np.ndarray   # float

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        if len(dates) != len(values):
            raise SeriesError("dates and values must be aligned")
        if len(dates) > 1 and not np.all(np.diff(dates).astype(int) > 0):
            raise SeriesError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True)
class StatsSummary:
    """Moments, quantiles and diagnostics of one return series."""

    mean: float
    std_dev: float
    minimum: float
    maximum: float
    skewness: float
    kurtosis: float           # non-excess, Gaussian = 3
    quantiles: dict           # {0.01, 0.05, 0.95, 0.99} -> value
    jarque_bera_pvalue: float
    ljung_box: list           # [(lag, Q, p_value), ...] at lags 10 and 20
    n_observations: int


def _detect_sep(text: str) -> str:
    head = text.splitlines()[0] if text else ""
    return ";" if head.count(";") > head.count(",") else ","


def load_price_series(source, *, date_col="date", price_col="price",
                      roll_col=None) -> PriceSeries:
    """Parse a delimited text table (comma or semicolon) into a PriceSeries.

    ``source`` may be a path, a file-like object or raw text.  Dates must be
    ISO-8601; the optional roll column accepts {0, 1, true, false}.  Rows are
    sorted by date; malformed rows are rejected with their identity.
    """
    if hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode()
    elif isinstance(source, (str,)) and "\n" in source:
        text = source
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    sep = _detect_sep(text)
    df = pd.read_csv(io.StringIO(text), sep=sep, dtype=str, skipinitialspace=True)
    for col in (date_col, price_col):
        if col not in df.columns:
            raise SeriesError(f"missing column '{col}'")
    try:
        dates = pd.to_datetime(df[date_col], format="ISO8601").dt.date
    except (ValueError, TypeError):
        # pinpoint the first bad row
        for i, raw in enumerate(df[date_col]):
            try:
                dt.date.fromisoformat(str(raw).strip()[:10])
            except ValueError:
                raise SeriesError(f"malformed date '{raw}' at row {i + 2}") from None
        raise
    try:
        prices = df[price_col].astype(float).to_numpy()
    except ValueError:
        for i, raw in enumerate(df[price_col]):
            try:
                float(raw)
            except (TypeError, ValueError):
                raise SeriesError(f"malformed price '{raw}' at row {i + 2}") from None
        raise
    if roll_col is not None:
        if roll_col not in df.columns:
            raise SeriesError(f"missing column '{roll_col}'")
        rolls = np.zeros(len(df), dtype=bool)
        for i, raw in enumerate(df[roll_col].fillna("")):
            token = str(raw).strip()
            if token in _TRUE:
                rolls[i] = True
            elif token in _FALSE:
                rolls[i] = False
            else:
                raise SeriesError(f"malformed roll flag '{raw}' at row {i + 2}")
    else:
        rolls = np.zeros(len(df), dtype=bool)

    dates64 = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(dates64, kind="stable")
    dates64, prices, rolls = dates64[order], prices[order], rolls[order]
    dup = np.flatnonzero(np.diff(dates64).astype(int) == 0)
    if dup.size:
        raise SeriesError(f"duplicate date {dates64[dup[0]]}")
    bad = np.flatnonzero(~(prices > 0.0))
    if bad.size:
        raise SeriesError(f"non-positive price at {dates64[bad[0]]}")
    return PriceSeries(dates64, prices, rolls)


def compute_returns(p: PriceSeries) -> ReturnSeries:
    """First difference in log prices, forced to zero on roll days."""
    if len(p) < 2:
        raise SeriesError("need at least 2 price observations")
    r = np.diff(np.log(p.prices))
    r[p.roll_flags[1:]] = 0.0
    return ReturnSeries(p.dates[1:], r)


def ljung_box(x: np.ndarray, lags: int) -> tuple[float, float]:
    """Ljung-Box Q statistic and chi-square p-value at the given lag."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n <= lags + 1:
        raise SeriesError(f"series too short for Ljung-Box at lag {lags}")
    xc = x - x.mean()
    denom = np.dot(xc, xc)
    if denom == 0.0:
        raise SeriesError("degenerate (constant) series")
    q = 0.0
    for k in range(1, lags + 1):
        rho = np.dot(xc[k:], xc[:-k]) / denom
        q += rho * rho / (n - k)
    q *= n * (n + 2)
    return q, float(sps.chi2.sf(q, lags))


QUANTILE_LEVELS = (0.01, 0.05, 0.95, 0.99)


def descriptive_stats(r: ReturnSeries) -> StatsSummary:
    """Sample moments, interpolated quantiles, Jarque-Bera and Ljung-Box.

    Quantiles follow the type-7 (linear interpolation of order statistics)
    convention; kurtosis is non-excess.  Requires at least 30 observations
    for the asymptotic tests to be meaningful.
    """
    x = r.values
    if len(x) < 30:
        raise SeriesError(f"need >= 30 observations, got {len(x)}")
    if np.min(x) == np.max(x):
        raise SeriesError("degenerate (constant) series")
    std = float(np.std(x, ddof=1))
    jb_stat, jb_p = sps.jarque_bera(x)
    return StatsSummary(
        mean=float(np.mean(x)),
        std_dev=std,
        minimum=float(np.min(x)),
        maximum=float(np.max(x)),
        skewness=float(sps.skew(x, bias=True)),
        kurtosis=float(sps.kurtosis(x, fisher=False, bias=True)),
        quantiles={q: float(np.quantile(x, q)) for q in QUANTILE_LEVELS},
        jarque_bera_pvalue=float(jb_p),
        ljung_box=[(m, *ljung_box(x, m)) for m in (10, 20)],
        n_observations=len(x),
    )


def split_sample(r: ReturnSeries, boundary: dt.date):
    """Split into (in_sample, out_of_sample) at the boundary date.

    The in-sample part holds every observation dated on or before the
    boundary; the two parts concatenate back to the input.
    """
    b = np.datetime64(boundary, "D")
    if b < r.dates[0] or b >= r.dates[-1]:
        raise SeriesError(
            f"boundary {boundary} outside usable range "
            f"[{r.dates[0]}, {r.dates[-1]})"
        )
    n_in = int(np.searchsorted(r.dates, b, side="right"))
    return (ReturnSeries(r.dates[:n_in], r.values[:n_in]),
            ReturnSeries(r.dates[n_in:], r.values[n_in:]))
