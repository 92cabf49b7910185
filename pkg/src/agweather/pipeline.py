"""Pipeline stages: synthetic data through battery results and summaries.

Each stage reads the artifacts of earlier stages from disk, so stages can
run in separate processes.  All randomness derives from the run seed via
named sub-seeds; rerunning a stage with the same config rewrites identical
bytes.  Stage functions return the list of files they wrote.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
import math
import os
import tempfile
import threading
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .battery import (
    BatteryConfig,
    r2_summary,
    read_results_csv,
    reference_comparison,
    results_to_csv_text,
    run_battery,
    significance_shares,
    spec_curve_export,
)
from .config import RunConfig
from .errors import MissingMetric, ProviderUnavailable
from .geo_extract import (
    CircleZone,
    FeatureRef,
    GeoPoint,
    RectZone,
    extract_feature,
    extract_simple,
    load_geo_context,
    resolve_feature,
    scheme_from_value,
)
from .grid_store import (
    RAIN,
    TEMP_MAX,
    TEMP_MEAN,
    RasterStack,
    SynthWeatherConfig,
    cell_of,
    load_raster_stack,
    save_raster_stack,
    synth_weather,
)
from .survey_model import (
    SURVEY_COLUMNS,
    SurveyPanel,
    SynthSurveyConfig,
    load_survey_csv,
    merge_weather,
    synth_geography,
    synth_survey,
)
from .weather_metrics import (
    LONG_RUN_BASES,
    season_metrics,
    season_slice,
    long_run_from_series,
)
from .errors import EmptyZone, OutOfDomain, TooFewSeasons


@dataclass(frozen=True)
class ProductPreset:
    """Synthetic stand-in for one gridded weather product."""

    product_id: str
    family: str  # rain | temp
    cell_size_lon: float
    cell_size_lat: float
    has_tmax: bool = False
    correlation_scale: float = 1.0  # multiplies the configured correlation

    @property
    def variable_kind(self) -> str:
        return RAIN if self.family == "rain" else TEMP_MEAN


#: six rainfall grids and three temperature grids at distinct resolutions;
#: tp1 also carries a daily-max series, the other two are mean-only
PRODUCT_PRESETS = {
    "rf1": ProductPreset("rf1", "rain", 0.10, 0.10),
    "rf2": ProductPreset("rf2", "rain", 0.05, 0.05),
    "rf3": ProductPreset("rf3", "rain", 0.50, 0.50),
    "rf4": ProductPreset("rf4", "rain", 0.28, 0.28),
    "rf5": ProductPreset("rf5", "rain", 0.625, 0.50),
    "rf6": ProductPreset("rf6", "rain", 0.0375, 0.0375),
    "tp1": ProductPreset("tp1", "temp", 0.50, 0.50, has_tmax=True),
    "tp2": ProductPreset("tp2", "temp", 0.28, 0.28),
    "tp3": ProductPreset("tp3", "temp", 0.625, 0.50),
}

#: synthetic temperature field parameters; hot enough that degree-day
#: counts cross the upper bound and vary instead of saturating
TEMP_FIELD = {"temp_mean_c": 27.0, "temp_amplitude_c": 5.0, "temp_noise_sd_c": 4.0}

#: small plausible in-country boxes for the synthetic geographies (w, s, e, n)
COUNTRY_BBOXES = {
    "ethiopia": (37.0, 7.0, 39.0, 9.0),
    "malawi": (33.5, -14.5, 35.5, -12.5),
    "niger": (2.5, 12.5, 4.5, 14.5),
    "nigeria": (6.5, 7.5, 8.5, 9.5),
    "tanzania": (33.0, -6.5, 35.0, -4.5),
    "uganda": (31.5, 0.5, 33.5, 2.5),
}

FEATURES_COLUMNS = ("country", "scheme", "hh_id", "method", "lon", "lat",
                    "west", "south", "east", "north", "radius_km")
METRICS_COLUMNS = ("country", "product_id", "scheme", "hh_id", "year",
                   "metric_id", "value", "missing_flag", "proxy_flag")
DROPS_COLUMNS = ("country", "product_id", "scheme", "hh_id", "year", "reason")


def derive_seed(*parts) -> int:
    """Stable 64-bit sub-seed from the run seed and a label path."""
    text = ":".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def atomic_write_text(path: str, text: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fmt_value(x) -> str:
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _csv_text(columns, records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(records)
    return buf.getvalue()


def _frame_csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


# --- synth-weather ---


def _grid_for(cfg: RunConfig, country: str, preset: ProductPreset):
    west, south, east, north = COUNTRY_BBOXES[country]
    m = cfg.margin_deg
    origin_lon = west - m
    origin_lat = north + m
    n_cols = math.ceil((east - west + 2 * m) / preset.cell_size_lon)
    n_rows = math.ceil((north - south + 2 * m) / preset.cell_size_lat)
    return origin_lon, origin_lat, n_rows, n_cols


def _weather_span(cfg: RunConfig) -> tuple[dt.date, int]:
    # extend half a year past end_year so wrapped seasons stay complete
    start = dt.date(cfg.weather_start_year, 1, 1)
    end = dt.date(cfg.weather_end_year + 1, 6, 30)
    return start, (end - start).days + 1


def _season_peak_doy(window) -> int:
    """Midpoint of the growing season; the synthetic wet season peaks there."""
    s = dt.date(2001, window.start_month, window.start_day).timetuple().tm_yday
    e = dt.date(2001, window.end_month, window.end_day).timetuple().tm_yday
    length = (e - s) % 365
    return int((s + length / 2 - 1) % 365) + 1


def weather_path(cfg: RunConfig, country: str, pid: str, tmax=False) -> str:
    suffix = "_tmax" if tmax else ""
    return os.path.join(cfg.out_dir, cfg.outputs["weather_dir"],
                        f"{country}_{pid}{suffix}.agwx")


def stage_synth_weather(cfg: RunConfig) -> list[str]:
    written = []
    start, n_days = _weather_span(cfg)
    for country in cfg.countries:
        peak_doy = _season_peak_doy(cfg.season_for(country))
        for pid in cfg.rain_products + cfg.temp_products:
            preset = PRODUCT_PRESETS[pid]
            origin_lon, origin_lat, n_rows, n_cols = _grid_for(cfg, country, preset)
            wcfg = SynthWeatherConfig(
                variable_kind=preset.variable_kind,
                product_id=pid,
                origin_lon=origin_lon,
                origin_lat=origin_lat,
                cell_size_lon=preset.cell_size_lon,
                cell_size_lat=preset.cell_size_lat,
                n_rows=n_rows,
                n_cols=n_cols,
                start_date=start,
                n_days=n_days,
                correlation_km=cfg.correlation_km * preset.correlation_scale,
                wet_prob_peak_doy=peak_doy,
                seed=derive_seed(cfg.seed, "weather", country, pid),
                **TEMP_FIELD,
            )
            stack = synth_weather(wcfg)
            path = weather_path(cfg, country, pid)
            os.makedirs(os.path.dirname(path), exist_ok=True)
            save_raster_stack(stack, path)
            written.append(path)
            if preset.has_tmax:
                rng = np.random.default_rng(
                    derive_seed(cfg.seed, "weather", country, pid, "tmax"))
                spread = 5.0 + 0.5 * rng.standard_normal(stack.values.shape)
                tmax = RasterStack(
                    variable_kind=TEMP_MAX,
                    product_id=pid,
                    origin_lon=origin_lon,
                    origin_lat=origin_lat,
                    cell_size_lon=preset.cell_size_lon,
                    cell_size_lat=preset.cell_size_lat,
                    n_rows=n_rows,
                    n_cols=n_cols,
                    start_date=start,
                    values=stack.values + spread.astype(np.float32),
                )
                tpath = weather_path(cfg, country, pid, tmax=True)
                save_raster_stack(tmax, tpath)
                written.append(tpath)
    return written


# --- synth-survey ---


def geo_paths(cfg: RunConfig, country: str) -> tuple[str, str]:
    base = os.path.join(cfg.out_dir, cfg.outputs["geo_dir"])
    return (os.path.join(base, f"{country}_households.csv"),
            os.path.join(base, f"{country}_admin.csv"))


def _truth_product(cfg: RunConfig) -> str:
    family = "rain" if cfg.planted_metric.startswith("rain") else "temp"
    pool = cfg.rain_products if family == "rain" else cfg.temp_products
    if not pool:
        raise MissingMetric(
            f"planted metric {cfg.planted_metric} needs a {family} product")
    return pool[0]


def _planted_values(cfg: RunConfig, country: str,
                    households: pd.DataFrame) -> dict[tuple[str, int], float]:
    """True-location values of the planted metric, one per household-year."""
    pid = _truth_product(cfg)
    stack = load_raster_stack(weather_path(cfg, country, pid))
    window = cfg.season_for(country)
    family = PRODUCT_PRESETS[pid].family
    need_lr = cfg.planted_metric in LONG_RUN_BASES

    cell_series: dict[tuple[int, int], object] = {}
    out: dict[tuple[str, int], float] = {}
    for rec in households.itertuples(index=False):
        point = GeoPoint(float(rec.lon), float(rec.lat))
        cell = cell_of(stack, point)
        if cell not in cell_series:
            series = extract_simple(stack, point, stack.start_date, stack.end_date)
            lr = None
            if need_lr:
                lr = long_run_from_series(
                    rain=series if family == "rain" else None,
                    temp=series if family == "temp" else None,
                    window=window,
                )
            per_year = {}
            for year in cfg.survey_years:
                season = season_slice(series, window, year)
                values, _, _ = season_metrics(
                    season if family == "rain" else None,
                    season if family == "temp" else None,
                    None, lr)
                per_year[year] = values[cfg.planted_metric]
            cell_series[cell] = per_year
        for year, value in cell_series[cell].items():
            if math.isnan(value):
                raise MissingMetric(
                    f"planted metric {cfg.planted_metric} is undefined at "
                    f"({rec.hh_id}, {year}); choose another metric or widen "
                    "the weather record")
            out[(rec.hh_id, year)] = value
    return out


def stage_synth_survey(cfg: RunConfig) -> list[str]:
    written = []
    panels = []
    truths = {}
    for country in cfg.countries:
        scfg = SynthSurveyConfig(
            country=country,
            n_admins=cfg.n_admins,
            eas_per_admin=cfg.eas_per_admin,
            households_per_ea=cfg.households_per_ea,
            years=cfg.survey_years,
            planted_metric=cfg.planted_metric,
            beta=cfg.beta,
            beta2=cfg.beta2,
            urban_share=cfg.urban_share,
            mover_share=cfg.mover_share,
            hh_scatter_km=cfg.hh_scatter_km,
            bbox=COUNTRY_BBOXES[country],
            seed=derive_seed(cfg.seed, "survey", country),
        )
        households, admin = synth_geography(scfg)
        hh_path, admin_path = geo_paths(cfg, country)
        written.append(atomic_write_text(hh_path, _frame_csv_text(households)))
        written.append(atomic_write_text(admin_path, _frame_csv_text(admin)))
        panel, truth = synth_survey(scfg, households, _planted_values(cfg, country, households))
        panels.append(panel.frame)
        truths[country] = truth
    survey = pd.concat(panels, ignore_index=True)[list(SURVEY_COLUMNS)]
    written.append(atomic_write_text(cfg.out_path("survey"), _frame_csv_text(survey)))
    written.append(atomic_write_text(
        cfg.out_path("truth"), json.dumps(truths, indent=2, sort_keys=True) + "\n"))
    return written


# --- extract ---


def _feature_record(country, scheme_num, hh_id, feature: FeatureRef):
    lon = lat = west = south = east = north = radius = ""
    if feature.point is not None:
        lon, lat = repr(feature.point.lon), repr(feature.point.lat)
    elif isinstance(feature.zone, CircleZone):
        lon = repr(feature.zone.center.lon)
        lat = repr(feature.zone.center.lat)
        radius = repr(feature.zone.radius_km)
    elif isinstance(feature.zone, RectZone):
        west, south = repr(feature.zone.west), repr(feature.zone.south)
        east, north = repr(feature.zone.east), repr(feature.zone.north)
    return (country, scheme_num, hh_id, feature.method,
            lon, lat, west, south, east, north, radius)


def _context_for(cfg: RunConfig, country: str):
    hh_path, admin_path = geo_paths(cfg, country)
    return load_geo_context(hh_path, admin_path,
                            buffer_radius_km=cfg.buffer_radius_km,
                            offset_seed=derive_seed(cfg.seed, "offset", country))


def stage_extract(cfg: RunConfig) -> list[str]:
    records = []
    for country in cfg.countries:
        ctx = _context_for(cfg, country)
        for scheme_num in cfg.schemes:
            scheme = scheme_from_value(scheme_num)
            for hh_id in sorted(ctx.households):
                feature = resolve_feature(scheme, hh_id, ctx)
                records.append(_feature_record(country, scheme_num, hh_id, feature))
    path = cfg.out_path("features")
    return [atomic_write_text(path, _csv_text(FEATURES_COLUMNS, records))]


# --- metrics ---


def _feature_key(feature: FeatureRef):
    if feature.point is not None:
        return (feature.method, "pt", feature.point.lon, feature.point.lat)
    z = feature.zone
    if isinstance(z, CircleZone):
        return ("zonal", "circle", z.center.lon, z.center.lat, z.radius_km)
    return ("zonal", "rect", z.west, z.south, z.east, z.north)


def _requested_metrics(cfg: RunConfig, family: str) -> tuple[str, ...]:
    return cfg.rain_metrics if family == "rain" else cfg.temp_metrics


def stage_metrics(cfg: RunConfig) -> list[str]:
    records = []
    for country in cfg.countries:
        ctx = _context_for(cfg, country)
        window = cfg.season_for(country)
        for pid in cfg.rain_products + cfg.temp_products:
            preset = PRODUCT_PRESETS[pid]
            requested = _requested_metrics(cfg, preset.family)
            if not requested:
                continue
            need_lr = any(m in LONG_RUN_BASES for m in requested)
            stack = load_raster_stack(weather_path(cfg, country, pid))
            tmax_stack = None
            tmax_path = weather_path(cfg, country, pid, tmax=True)
            if preset.has_tmax and os.path.exists(tmax_path):
                tmax_stack = load_raster_stack(tmax_path)

            season_cache: dict = {}
            failed: dict = {}

            def values_for(feature, year):
                fkey = _feature_key(feature)
                ckey = (fkey, year)
                if ckey in season_cache:
                    return season_cache[ckey]
                if fkey in failed:
                    season_cache[ckey] = None
                    return None
                try:
                    series = extract_feature(stack, feature, stack.start_date,
                                             stack.end_date)
                except (EmptyZone, OutOfDomain) as exc:
                    failed[fkey] = type(exc).__name__
                    season_cache[ckey] = None
                    return None
                tmax_series = None
                if tmax_stack is not None:
                    tmax_series = extract_feature(tmax_stack, feature,
                                                  tmax_stack.start_date,
                                                  tmax_stack.end_date)
                lr = None
                if need_lr:
                    try:
                        lr = long_run_from_series(
                            rain=series if preset.family == "rain" else None,
                            temp=series if preset.family == "temp" else None,
                            window=window)
                    except TooFewSeasons:
                        lr = None
                for yr in cfg.survey_years:
                    season = season_slice(series, window, yr)
                    tmax_season = (season_slice(tmax_series, window, yr)
                                   if tmax_series is not None else None)
                    season_cache[(fkey, yr)] = season_metrics(
                        season if preset.family == "rain" else None,
                        season if preset.family == "temp" else None,
                        tmax_season, lr)
                return season_cache[ckey]

            for scheme_num in cfg.schemes:
                scheme = scheme_from_value(scheme_num)
                for hh_id in sorted(ctx.households):
                    feature = resolve_feature(scheme, hh_id, ctx)
                    for year in cfg.survey_years:
                        result = values_for(feature, year)
                        for metric in requested:
                            if result is None:
                                value, miss, proxy = float("nan"), True, False
                            else:
                                vals, missing, proxies = result
                                value = vals[metric]
                                miss = missing[metric] or math.isnan(value)
                                proxy = proxies.get(metric, False)
                            records.append((
                                country, pid, scheme_num, hh_id, year, metric,
                                _fmt_value(value), int(miss), int(proxy),
                            ))
    path = cfg.out_path("metrics")
    return [atomic_write_text(path, _csv_text(METRICS_COLUMNS, records))]


# --- merge ---


def load_metrics_csv(path) -> pd.DataFrame:
    frame = pd.read_csv(
        path,
        dtype={"country": str, "product_id": str, "hh_id": str, "metric_id": str},
    )
    missing = [c for c in METRICS_COLUMNS if c not in frame.columns]
    if missing:
        raise ProviderUnavailable(f"{path}: missing metric columns {missing}")
    return frame


def stage_merge(cfg: RunConfig) -> list[str]:
    panel = load_survey_csv(cfg.out_path("survey"))
    metrics = load_metrics_csv(cfg.out_path("metrics"))
    written = []
    drop_records = []
    merged_dir = os.path.join(cfg.out_dir, cfg.outputs["merged_dir"])
    for country in cfg.countries:
        sub = SurveyPanel(
            frame=panel.frame.loc[panel.frame["country"] == country],
            movers_excluded=panel.movers_excluded,
        )
        msub = metrics.loc[metrics["country"] == country]
        for pid in cfg.rain_products + cfg.temp_products:
            family_metrics = _requested_metrics(cfg, PRODUCT_PRESETS[pid].family)
            if not family_metrics:
                continue
            for scheme_num in cfg.schemes:
                merged = merge_weather(sub, msub, pid, scheme_num, family_metrics)
                out = os.path.join(merged_dir, f"{country}_{pid}_s{scheme_num}.csv")
                written.append(atomic_write_text(out, _frame_csv_text(merged.frame)))
                for rec in merged.drops.itertuples(index=False):
                    drop_records.append(
                        (country, pid, scheme_num, rec.hh_id, rec.year, rec.reason))
    written.append(atomic_write_text(
        cfg.out_path("drops"), _csv_text(DROPS_COLUMNS, drop_records)))
    return written


# --- battery ---


class PipelineProvider:
    """Merged-frame provider over the staged survey and metrics artifacts.

    Frames are cached per battery cell; the cache lock also serializes
    builds so concurrent workers never duplicate a merge.
    """

    def __init__(self, panels: dict[str, SurveyPanel], metrics: pd.DataFrame):
        self._panels = panels
        # pre-split once: per-cell boolean filtering over the full metrics
        # frame dominates battery time at desk scale
        self._slices = {
            (c, p, int(s)): g
            for (c, p, s), g in metrics.groupby(["country", "product_id", "scheme"])
        }
        self._countries = set(metrics["country"])
        self._cache: dict = {}
        self._lock = threading.Lock()

    def frame_for(self, country, products, scheme, metric_ids):
        key = (country, tuple(products), int(scheme), tuple(metric_ids))
        with self._lock:
            cached = self._cache.get(key)
            if cached is not None:
                return cached
            panel = self._panels.get(country)
            if panel is None or country not in self._countries:
                raise ProviderUnavailable(f"no staged data for country {country!r}")
            work = panel
            for pid in products:
                staged = self._slices.get((country, pid, int(scheme)))
                if staged is None or staged.empty:
                    raise ProviderUnavailable(
                        f"no metrics staged for ({country}, {pid}, scheme {scheme})")
                family = PRODUCT_PRESETS[pid].family
                wanted = tuple(m for m in metric_ids
                               if m.split("_", 1)[0] == family)
                if not wanted:
                    continue
                merged = merge_weather(work, staged, pid, scheme, wanted)
                work = SurveyPanel(frame=merged.frame, movers_excluded=0)
            frame = work.frame
            self._cache[key] = frame
            return frame


def battery_config(cfg: RunConfig) -> BatteryConfig:
    return BatteryConfig(
        countries=cfg.countries,
        rain_products=cfg.rain_products,
        temp_products=cfg.temp_products,
        schemes=cfg.schemes,
        rain_metrics=cfg.rain_metrics,
        temp_metrics=cfg.temp_metrics,
        outcomes=("primary_crop_yield", "total_farm_value"),
        models=cfg.models,
        combination_blocks=cfg.combination_blocks,
        threads=cfg.threads,
        seed=cfg.seed,
    )


def build_provider(cfg: RunConfig) -> PipelineProvider:
    panel = load_survey_csv(cfg.out_path("survey"))
    metrics = load_metrics_csv(cfg.out_path("metrics"))
    panels = {
        country: SurveyPanel(
            frame=panel.frame.loc[panel.frame["country"] == country],
            movers_excluded=panel.movers_excluded,
        )
        for country in cfg.countries
    }
    return PipelineProvider(panels, metrics)


def stage_battery(cfg: RunConfig) -> list[str]:
    rows = run_battery(battery_config(cfg), build_provider(cfg))
    return [atomic_write_text(cfg.out_path("results"), results_to_csv_text(rows))]


# --- summaries ---


def stage_summarize(cfg: RunConfig) -> list[str]:
    rows = read_results_csv(cfg.out_path("results"))
    shares = significance_shares(rows, cfg.share_group_by, cfg.share_levels,
                                 p_rule=cfg.p_rule)
    r2 = r2_summary(rows, cfg.r2_group_by)
    return [
        atomic_write_text(cfg.out_path("shares"), _frame_csv_text(shares)),
        atomic_write_text(cfg.out_path("r2"), _frame_csv_text(r2)),
    ]


def stage_spec_curve(cfg: RunConfig) -> list[str]:
    rows = read_results_csv(cfg.out_path("results"))
    curve = spec_curve_export(rows, filters=dict(cfg.curve_filters),
                              p_rule=cfg.p_rule)
    return [atomic_write_text(cfg.out_path("spec_curve"), _frame_csv_text(curve))]


def stage_diff_test(cfg: RunConfig) -> list[str]:
    rows = read_results_csv(cfg.out_path("results"))
    table = reference_comparison(rows)
    return [atomic_write_text(cfg.out_path("diff_tests"), _frame_csv_text(table))]


STAGES = {
    "synth-weather": stage_synth_weather,
    "synth-survey": stage_synth_survey,
    "extract": stage_extract,
    "metrics": stage_metrics,
    "merge": stage_merge,
    "battery": stage_battery,
    "summarize": stage_summarize,
    "spec-curve": stage_spec_curve,
    "diff-test": stage_diff_test,
}

STAGE_ORDER = tuple(STAGES)
