"""Growing-season weather metrics.

Turns one daily series into the 22 season metrics used by the regression
battery: 14 rainfall metrics and 8 temperature metrics, including raw
deviations from a long-run mean and z-scores against the long-run sd.

Conventions fixed here:
  * a rainy day has >= 1 mm, a no-rain day < 1 mm (exact partition);
  * the dry spell is the longest run of no-rain days;
  * GDD counts days whose mean temperature lies inside closed bounds;
  * deviation = value minus long-run mean; z = deviation / long-run sd;
  * the long run starts in 1983 and needs at least two seasons;
  * even-length medians take the lower middle value;
  * variance uses the n-1 denominator; skew is the adjusted
    Fisher-Pearson coefficient and is 0 for zero-variance series.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .errors import (
    EmptySeason,
    EmptySeries,
    RangeUnavailable,
    TooFewSeasons,
)
from .geo_extract import DailySeries

RAIN_THRESHOLD_MM = 1.0
DEFAULT_GDD_BOUNDS = (10.0, 30.0)
LONG_RUN_FROM_YEAR = 1983

RAIN_METRICS = (
    "rain_mean",
    "rain_median",
    "rain_variance",
    "rain_skew",
    "rain_total",
    "rain_dev_total",
    "rain_z_total",
    "rain_days",
    "rain_dev_days",
    "rain_norain_days",
    "rain_dev_norain_days",
    "rain_pct_days",
    "rain_dev_pct_days",
    "rain_dry_spell",
)

TEMP_METRICS = (
    "temp_mean",
    "temp_median",
    "temp_variance",
    "temp_skew",
    "temp_gdd",
    "temp_dev_gdd",
    "temp_z_gdd",
    "temp_max_avg",
)

ALL_METRICS = RAIN_METRICS + TEMP_METRICS

#: family of each metric id
METRIC_FAMILY = {m: "rain" for m in RAIN_METRICS} | {m: "temp" for m in TEMP_METRICS}

#: deviation/z metric -> the base metric whose long-run stats it uses
LONG_RUN_BASES = {
    "rain_dev_total": "rain_total",
    "rain_z_total": "rain_total",
    "rain_dev_days": "rain_days",
    "rain_dev_norain_days": "rain_norain_days",
    "rain_dev_pct_days": "rain_pct_days",
    "temp_dev_gdd": "temp_gdd",
    "temp_z_gdd": "temp_gdd",
}

#: base metrics a LongRunStats must cover
LONG_RUN_BASE_METRICS = tuple(dict.fromkeys(LONG_RUN_BASES.values()))


@dataclass(frozen=True)
class SeasonWindow:
    """Growing-season date window; wrapping windows belong to the start year."""

    country: str
    start_month: int
    start_day: int
    end_month: int
    end_day: int

    def __post_init__(self):
        # validate against a fixed non-leap year; Feb 29 endpoints disallowed
        try:
            dt.date(2001, self.start_month, self.start_day)
            dt.date(2001, self.end_month, self.end_day)
        except ValueError as exc:
            raise ValueError(f"invalid season window date: {exc}") from exc

    @property
    def wraps(self) -> bool:
        return (self.end_month, self.end_day) < (self.start_month, self.start_day)

    def dates(self, year: int) -> tuple[dt.date, dt.date]:
        start = dt.date(year, self.start_month, self.start_day)
        end = dt.date(year + (1 if self.wraps else 0), self.end_month, self.end_day)
        return start, end


#: shipped single-rainy-season defaults per country
DEFAULT_SEASON_WINDOWS = {
    "ethiopia": SeasonWindow("ethiopia", 6, 1, 9, 30),
    "malawi": SeasonWindow("malawi", 11, 1, 4, 30),
    "niger": SeasonWindow("niger", 6, 1, 9, 30),
    "nigeria": SeasonWindow("nigeria", 5, 1, 10, 31),
    "tanzania": SeasonWindow("tanzania", 11, 1, 4, 30),
    "uganda": SeasonWindow("uganda", 3, 1, 11, 30),
}


@dataclass(frozen=True)
class LongRunStats:
    """Per-metric mean and sample sd over all seasons from ``from_year`` on."""

    from_year: int
    n_seasons: int
    stats: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def mean(self, metric: str) -> float:
        return self.stats[metric][0]

    def sd(self, metric: str) -> float:
        return self.stats[metric][1]

    def has(self, metric: str) -> bool:
        return metric in self.stats


def season_slice(series: DailySeries, window: SeasonWindow, year: int) -> DailySeries:
    """Contiguous sub-series covering the window anchored at ``year``."""
    start, end = window.dates(year)
    last = series.start_date + dt.timedelta(days=len(series) - 1)
    if start < series.start_date or end > last:
        raise RangeUnavailable(
            f"season {start}..{end} outside record {series.start_date}..{last}"
        )
    i0 = (start - series.start_date).days
    i1 = (end - series.start_date).days
    return DailySeries(
        start_date=start,
        values=series.values[i0 : i1 + 1].copy(),
        variable_kind=series.variable_kind,
        scheme=series.scheme,
        product_id=series.product_id,
    )


def moments(values: Sequence[float]) -> tuple[float, float, float, float]:
    """(mean, lower-median, sample variance, adjusted skew) of a series."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise EmptySeries("moments of an empty series")
    mean = float(x.mean())
    median = float(np.sort(x)[(x.size - 1) // 2])
    if x.size < 2:
        return mean, median, float("nan"), float("nan")
    variance = float(x.var(ddof=1))
    if variance == 0.0:
        skew = 0.0
    elif x.size < 3:
        skew = float("nan")
    else:
        skew = float(sps.skew(x, bias=False))
    return mean, median, variance, skew


def _dev_and_z(value: float, base: str, lr: LongRunStats | None):
    """Raw deviation and z-score; NaN when the long run is absent/degenerate."""
    if lr is None or not lr.has(base):
        return float("nan"), float("nan")
    dev = value - lr.mean(base)
    sd = lr.sd(base)
    z = dev / sd if sd > 0.0 else float("nan")
    return dev, z


def rainfall_metrics(season: DailySeries, lr: LongRunStats | None) -> dict[str, float]:
    """All 14 rainfall metrics for one season (assumes no missing days)."""
    x = np.asarray(season.values, dtype=np.float64)
    if x.size == 0:
        raise EmptySeason("empty rainfall season")
    n = x.size
    mean, median, variance, skew = moments(x)
    total = float(x.sum())
    wet = x >= RAIN_THRESHOLD_MM
    rain_days = int(wet.sum())
    norain_days = n - rain_days
    pct = rain_days / n
    dry_spell = _longest_run(~wet)

    dev_total, z_total = _dev_and_z(total, "rain_total", lr)
    dev_days, _ = _dev_and_z(float(rain_days), "rain_days", lr)
    dev_norain, _ = _dev_and_z(float(norain_days), "rain_norain_days", lr)
    dev_pct, _ = _dev_and_z(pct, "rain_pct_days", lr)

    return {
        "rain_mean": mean,
        "rain_median": median,
        "rain_variance": variance,
        "rain_skew": skew,
        "rain_total": total,
        "rain_dev_total": dev_total,
        "rain_z_total": z_total,
        "rain_days": float(rain_days),
        "rain_dev_days": dev_days,
        "rain_norain_days": float(norain_days),
        "rain_dev_norain_days": dev_norain,
        "rain_pct_days": pct,
        "rain_dev_pct_days": dev_pct,
        "rain_dry_spell": float(dry_spell),
    }


def temperature_metrics(
    season_mean: DailySeries,
    season_max: DailySeries | None,
    lr: LongRunStats | None,
    bounds: tuple[float, float] = DEFAULT_GDD_BOUNDS,
) -> tuple[dict[str, float], bool]:
    """All 8 temperature metrics plus a flag marking the tmax_avg proxy.

    When no daily-max series exists, tmax_avg falls back to the season
    maximum of the daily means and the proxy flag is set.
    """
    x = np.asarray(season_mean.values, dtype=np.float64)
    if x.size == 0:
        raise EmptySeason("empty temperature season")
    t_low, t_high = bounds
    if t_high <= t_low:
        raise ValueError("GDD bounds must satisfy t_low < t_high")
    mean, median, variance, skew = moments(x)
    gdd = int(((x >= t_low) & (x <= t_high)).sum())
    dev_gdd, z_gdd = _dev_and_z(float(gdd), "temp_gdd", lr)
    if season_max is not None:
        mx = np.asarray(season_max.values, dtype=np.float64)
        if mx.size == 0:
            raise EmptySeason("empty daily-max season")
        tmax_avg = float(mx.mean())
        proxy = False
    else:
        tmax_avg = float(x.max())
        proxy = True
    return (
        {
            "temp_mean": mean,
            "temp_median": median,
            "temp_variance": variance,
            "temp_skew": skew,
            "temp_gdd": float(gdd),
            "temp_dev_gdd": dev_gdd,
            "temp_z_gdd": z_gdd,
            "temp_max_avg": tmax_avg,
        },
        proxy,
    )


def _longest_run(flags: np.ndarray) -> int:
    """Length of the longest run of True values."""
    best = run = 0
    for f in flags:
        run = run + 1 if f else 0
        if run > best:
            best = run
    return best


def long_run_stats(
    per_season: Mapping[str, Sequence[float]], from_year: int = LONG_RUN_FROM_YEAR
) -> LongRunStats:
    """Sample mean/sd per metric across seasons; needs >= 2 seasons."""
    counts = {len(v) for v in per_season.values()}
    if len(counts) > 1:
        raise ValueError("metrics cover different numbers of seasons")
    n = counts.pop() if counts else 0
    if n < 2:
        raise TooFewSeasons(f"{n} season(s); z-scores need at least 2")
    stats = {}
    for metric, vals in per_season.items():
        arr = np.asarray(vals, dtype=np.float64)
        stats[metric] = (float(arr.mean()), float(arr.std(ddof=1)))
    return LongRunStats(from_year=from_year, n_seasons=n, stats=stats)


def long_run_from_series(
    rain: DailySeries | None,
    temp: DailySeries | None,
    window: SeasonWindow,
    from_year: int = LONG_RUN_FROM_YEAR,
    gdd_bounds: tuple[float, float] = DEFAULT_GDD_BOUNDS,
) -> LongRunStats:
    """Long-run base-metric stats over every complete season in the record.

    Seasons containing missing days are skipped; fewer than two usable
    seasons raises TooFewSeasons.
    """
    ref = rain if rain is not None else temp
    if ref is None:
        raise ValueError("need at least one of rain/temp series")
    per_season: dict[str, list[float]] = {}
    year = max(from_year, ref.start_date.year)
    n_used = 0
    while True:
        try:
            slices = {}
            if rain is not None:
                slices["rain"] = season_slice(rain, window, year)
            if temp is not None:
                slices["temp"] = season_slice(temp, window, year)
        except RangeUnavailable:
            break
        year += 1
        if any(np.isnan(s.values).any() for s in slices.values()):
            continue
        n_used += 1
        if "rain" in slices:
            x = np.asarray(slices["rain"].values, dtype=np.float64)
            wet = x >= RAIN_THRESHOLD_MM
            per_season.setdefault("rain_total", []).append(float(x.sum()))
            per_season.setdefault("rain_days", []).append(float(wet.sum()))
            per_season.setdefault("rain_norain_days", []).append(float((~wet).sum()))
            per_season.setdefault("rain_pct_days", []).append(float(wet.mean()))
        if "temp" in slices:
            t = np.asarray(slices["temp"].values, dtype=np.float64)
            gdd = float(((t >= gdd_bounds[0]) & (t <= gdd_bounds[1])).sum())
            per_season.setdefault("temp_gdd", []).append(gdd)
    if n_used < 2:
        raise TooFewSeasons(f"only {n_used} usable season(s) from {from_year}")
    return long_run_stats(per_season, from_year=from_year)


def season_metrics(
    rain_season: DailySeries | None,
    temp_season: DailySeries | None,
    tmax_season: DailySeries | None,
    lr: LongRunStats | None,
    gdd_bounds: tuple[float, float] = DEFAULT_GDD_BOUNDS,
) -> tuple[dict[str, float], dict[str, bool], dict[str, bool]]:
    """Metric values plus per-metric missing/proxy flags for one season.

    A season with any missing day yields NaN for every metric of that
    family with the missing flag set, rather than silently imputing.
    """
    values: dict[str, float] = {}
    missing: dict[str, bool] = {}
    proxy: dict[str, bool] = {m: False for m in ALL_METRICS}
    if rain_season is not None:
        x = np.asarray(rain_season.values, dtype=np.float64)
        if x.size and np.isnan(x).any():
            for m in RAIN_METRICS:
                values[m] = float("nan")
                missing[m] = True
        else:
            for m, v in rainfall_metrics(rain_season, lr).items():
                values[m] = v
                missing[m] = bool(np.isnan(v))
    if temp_season is not None:
        t = np.asarray(temp_season.values, dtype=np.float64)
        bad = t.size and np.isnan(t).any()
        if not bad and tmax_season is not None:
            mx = np.asarray(tmax_season.values, dtype=np.float64)
            bad = mx.size and np.isnan(mx).any()
        if bad:
            for m in TEMP_METRICS:
                values[m] = float("nan")
                missing[m] = True
        else:
            tvals, is_proxy = temperature_metrics(temp_season, tmax_season, lr, gdd_bounds)
            for m, v in tvals.items():
                values[m] = v
                missing[m] = bool(np.isnan(v))
            proxy["temp_max_avg"] = is_proxy
    return values, missing, proxy
