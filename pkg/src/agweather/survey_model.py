"""Household panel: loading, synthetic generation, and weather merging.

The panel is a pandas DataFrame with the survey.csv schema.  Outcomes are
modeled on an inverse-hyperbolic-sine scale; the same transform policy
(which outcomes, inputs, and weather metrics get IHS) is defined here and
shared with the design-matrix builder so planted coefficients are
recoverable by the estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    AmbiguousJoin,
    DuplicateKey,
    MissingMetric,
    NegativeOutcome,
    SchemaMismatch,
)
from .geo_extract import GeoPoint, destination_point

SURVEY_COLUMNS = (
    "country",
    "hh_id",
    "ea_id",
    "admin_id",
    "year",
    "wave",
    "primary_crop_yield",
    "total_farm_value",
    "labor_rate",
    "fertilizer_rate",
    "seed_rate",
    "pesticide",
    "herbicide",
    "irrigation",
    "mover",
)

OUTCOMES = ("primary_crop_yield", "total_farm_value")
CONTROL_COLUMNS = (
    "labor_rate",
    "fertilizer_rate",
    "seed_rate",
    "pesticide",
    "herbicide",
    "irrigation",
)
_BINARY_COLUMNS = ("pesticide", "herbicide", "irrigation", "mover")
_RATE_COLUMNS = ("labor_rate", "fertilizer_rate", "seed_rate")

#: columns that enter regressions IHS-transformed
IHS_TRANSFORMED_INPUTS = frozenset(_RATE_COLUMNS)
#: weather metrics that enter regressions IHS-transformed (heavy-tailed,
#: unbounded support); counts, shares, and z-scores stay raw
IHS_TRANSFORMED_METRICS = frozenset({"rain_total"})

#: calibration targets (levels) for the synthetic generator, by country
COUNTRY_YIELD_TARGETS = {
    "ethiopia": 1600.0,
    "malawi": 1200.0,
    "niger": 220.0,
    "nigeria": 1600.0,
    "tanzania": 1050.0,
    "uganda": 90.0,
}
COUNTRY_VALUE_TARGETS = {
    "ethiopia": 440.0,
    "malawi": 525.0,
    "niger": 60.0,
    "nigeria": 680.0,
    "tanzania": 235.0,
    "uganda": 95.0,
}


def ihs(x):
    """Inverse hyperbolic sine, ln(x + sqrt(x^2 + 1)); odd and 0 at 0."""
    return np.arcsinh(x)


def transform_metric(metric_id: str, values):
    """Apply the shared weather-regressor transform policy."""
    if metric_id in IHS_TRANSFORMED_METRICS:
        return ihs(values)
    return np.asarray(values, dtype=np.float64)


def transform_control(column: str, values):
    """Apply the shared input-control transform policy."""
    if column in IHS_TRANSFORMED_INPUTS:
        return ihs(values)
    return np.asarray(values, dtype=np.float64)


@dataclass
class SurveyPanel:
    """Validated household-year rows; movers already excluded."""

    frame: pd.DataFrame
    movers_excluded: int = 0

    def __len__(self) -> int:
        return len(self.frame)


def _validate_panel(frame: pd.DataFrame, source: str) -> None:
    missing = [c for c in SURVEY_COLUMNS if c not in frame.columns]
    if missing:
        raise SchemaMismatch(f"{source}: missing columns {missing}")
    dup = frame.duplicated(subset=["hh_id", "year"])
    if dup.any():
        key = frame.loc[dup.idxmax(), ["hh_id", "year"]].tolist()
        raise DuplicateKey(f"{source}: duplicate (hh_id, year) {tuple(key)}")
    for col in OUTCOMES + _RATE_COLUMNS:
        vals = frame[col].to_numpy(dtype=np.float64)
        if np.nanmin(vals, initial=0.0) < 0.0:
            raise NegativeOutcome(f"{source}: negative values in {col}")
    for col in _BINARY_COLUMNS:
        vals = frame[col].to_numpy()
        if not np.isin(vals, (0, 1)).all():
            raise SchemaMismatch(f"{source}: {col} must be 0/1")


def load_survey_csv(path) -> SurveyPanel:
    """Read and validate survey.csv; mover rows are dropped and counted."""
    frame = pd.read_csv(
        path,
        dtype={"country": str, "hh_id": str, "ea_id": str, "admin_id": str},
    )
    _validate_panel(frame, str(path))
    frame["year"] = frame["year"].astype(int)
    frame["wave"] = frame["wave"].astype(int)
    movers = int((frame["mover"] == 1).sum())
    frame = frame.loc[frame["mover"] == 0].reset_index(drop=True)
    return SurveyPanel(frame=frame[list(SURVEY_COLUMNS)], movers_excluded=movers)


# --- synthetic panel ---


@dataclass(frozen=True)
class SynthSurveyConfig:
    """Synthetic panel layout and data-generating coefficients.

    Outcomes follow, on the IHS scale,
    ``y* = intercept + a_h + g_t + sum pi_k T(x_k) + beta T(W) + beta2 T(W)^2 + e``
    and are inverted to levels with sinh, floored at zero.  The intercept is
    calibrated so mean levels land near the country target.
    """

    country: str = "ethiopia"
    n_admins: int = 4
    eas_per_admin: int = 5
    households_per_ea: int = 10
    years: tuple[int, ...] = (2010, 2012, 2014)
    planted_metric: str = "rain_total"
    beta: float = 0.15
    beta2: float = 0.0
    input_effects: dict = field(
        default_factory=lambda: {
            "labor_rate": 0.08,
            "fertilizer_rate": 0.04,
            "seed_rate": 0.04,
            "pesticide": 0.10,
            "herbicide": 0.05,
            "irrigation": 0.20,
        }
    )
    hh_effect_sd: float = 0.30
    year_effects: tuple[float, ...] | None = None
    year_effect_sd: float = 0.08
    noise_sd: float = 0.35
    urban_share: float = 0.2
    mover_share: float = 0.02
    hh_scatter_km: float = 1.5
    bbox: tuple[float, float, float, float] = (36.0, 6.0, 40.0, 10.0)  # w, s, e, n
    target_yield: float | None = None
    target_value: float | None = None
    seed: int = 0

    def __post_init__(self):
        if min(self.n_admins, self.eas_per_admin, self.households_per_ea) <= 0:
            raise ValueError("layout counts must be positive")
        if not self.years:
            raise ValueError("need at least one wave year")
        if self.noise_sd <= 0:
            raise ValueError("noise_sd must be > 0")
        if len(set(self.years)) != len(self.years):
            raise ValueError("wave years must be distinct")
        w, s, e, n = self.bbox
        if not (e > w and n > s):
            raise ValueError("bbox must have positive extent")

    @property
    def yield_target(self) -> float:
        if self.target_yield is not None:
            return self.target_yield
        return COUNTRY_YIELD_TARGETS.get(self.country, 800.0)

    @property
    def value_target(self) -> float:
        if self.target_value is not None:
            return self.target_value
        return COUNTRY_VALUE_TARGETS.get(self.country, 300.0)


def synth_geography(cfg: SynthSurveyConfig) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Households and admin rectangles tiling the bbox; deterministic per seed.

    Admin units form a near-square grid; EA anchor points are drawn inside
    each unit with a margin, and households scatter around the anchor.  The
    urban flag is EA-level.
    """
    rng = np.random.default_rng([cfg.seed, 1])
    west, south, east, north = cfg.bbox
    n_x = math.ceil(math.sqrt(cfg.n_admins))
    n_y = math.ceil(cfg.n_admins / n_x)
    dx = (east - west) / n_x
    dy = (north - south) / n_y

    admin_rows = []
    hh_rows = []
    for a in range(cfg.n_admins):
        gx, gy = a % n_x, a // n_x
        w = west + gx * dx
        s = south + gy * dy
        admin_id = f"{cfg.country[:3]}-a{a:03d}"
        admin_rows.append(
            {
                "admin_id": admin_id,
                "west": w,
                "south": s,
                "east": w + dx,
                "north": s + dy,
                "centroid_lon": w + 0.5 * dx,
                "centroid_lat": s + 0.5 * dy,
            }
        )
        for e in range(cfg.eas_per_admin):
            ea_id = f"{admin_id}-e{e:03d}"
            anchor = GeoPoint(
                w + dx * rng.uniform(0.1, 0.9),
                s + dy * rng.uniform(0.1, 0.9),
            )
            urban = bool(rng.random() < cfg.urban_share)
            for h in range(cfg.households_per_ea):
                p = destination_point(
                    anchor,
                    rng.uniform(0.0, 2.0 * math.pi),
                    rng.uniform(0.0, cfg.hh_scatter_km),
                )
                hh_rows.append(
                    {
                        "hh_id": f"{ea_id}-h{h:03d}",
                        "ea_id": ea_id,
                        "admin_id": admin_id,
                        "lon": p.lon,
                        "lat": p.lat,
                        "urban": int(urban),
                    }
                )
    return pd.DataFrame(hh_rows), pd.DataFrame(admin_rows)


def synth_survey(
    cfg: SynthSurveyConfig,
    households: pd.DataFrame,
    metric_values: dict[tuple[str, int], float],
) -> tuple[SurveyPanel, dict]:
    """Generate the panel given planted-metric values per (hh_id, year).

    Returns the panel (movers flagged, not dropped) and the ground-truth
    record of every data-generating coefficient.
    """
    rng = np.random.default_rng([cfg.seed, 2])
    hh_ids = households["hh_id"].tolist()
    n_hh = len(hh_ids)
    years = list(cfg.years)
    for hh in hh_ids:
        for year in years:
            if (hh, year) not in metric_values:
                raise MissingMetric(f"no {cfg.planted_metric} value for ({hh}, {year})")

    alpha = {
        (hh, "y"): v
        for hh, v in zip(hh_ids, rng.normal(0.0, cfg.hh_effect_sd, size=n_hh))
    }
    alpha.update(
        {
            (hh, "v"): v
            for hh, v in zip(hh_ids, rng.normal(0.0, cfg.hh_effect_sd, size=n_hh))
        }
    )
    if cfg.year_effects is not None:
        if len(cfg.year_effects) != len(years):
            raise ValueError("year_effects length must match years")
        gamma = dict(zip(years, cfg.year_effects))
    else:
        gamma = dict(zip(years, rng.normal(0.0, cfg.year_effect_sd, size=len(years))))
    movers = set(
        hh for hh, flag in zip(hh_ids, rng.random(n_hh) < cfg.mover_share) if flag
    )

    # inputs drawn once per household-year
    rows = []
    for hh in hh_ids:
        for year in years:
            labor = rng.gamma(2.0, 120.0)
            fert = 0.0 if rng.random() < 0.5 else rng.gamma(0.6, 80.0)
            seed_rate = rng.gamma(2.0, 15.0)
            rows.append(
                {
                    "hh_id": hh,
                    "year": year,
                    "labor_rate": labor,
                    "fertilizer_rate": fert,
                    "seed_rate": seed_rate,
                    "pesticide": int(rng.random() < 0.10),
                    "herbicide": int(rng.random() < 0.10),
                    "irrigation": int(rng.random() < 0.03),
                }
            )
    frame = pd.DataFrame(rows)

    w_raw = np.array(
        [metric_values[(hh, yr)] for hh, yr in zip(frame["hh_id"], frame["year"])]
    )
    w = transform_metric(cfg.planted_metric, w_raw)
    signal = cfg.beta * w + cfg.beta2 * w * w
    for col, pi in cfg.input_effects.items():
        signal = signal + pi * transform_control(col, frame[col].to_numpy(np.float64))
    gamma_arr = frame["year"].map(gamma).to_numpy(np.float64)

    # calibrate intercepts so mean *levels* land near the target: on the
    # exponential branch of sinh, random spread inflates the mean by
    # roughly exp(var/2), so subtract half the total ihs-scale variance
    mean_signal = float(np.mean(signal))
    spread2 = (
        float(np.var(signal))
        + float(np.var(gamma_arr))
        + cfg.hh_effect_sd**2
        + cfg.noise_sd**2
    )
    intercept_y = float(ihs(cfg.yield_target)) - mean_signal - 0.5 * spread2
    intercept_v = float(ihs(cfg.value_target)) - mean_signal - 0.5 * spread2

    alpha_y = frame["hh_id"].map(lambda h: alpha[(h, "y")]).to_numpy(np.float64)
    alpha_v = frame["hh_id"].map(lambda h: alpha[(h, "v")]).to_numpy(np.float64)
    eps_y = rng.normal(0.0, cfg.noise_sd, size=len(frame))
    eps_v = rng.normal(0.0, cfg.noise_sd, size=len(frame))

    y_star = intercept_y + alpha_y + gamma_arr + signal + eps_y
    v_star = intercept_v + alpha_v + gamma_arr + signal + eps_v
    frame["primary_crop_yield"] = np.maximum(np.sinh(y_star), 0.0)
    frame["total_farm_value"] = np.maximum(np.sinh(v_star), 0.0)

    geo = households.set_index("hh_id")
    frame["country"] = cfg.country
    frame["ea_id"] = frame["hh_id"].map(geo["ea_id"])
    frame["admin_id"] = frame["hh_id"].map(geo["admin_id"])
    frame["wave"] = frame["year"].map({y: i + 1 for i, y in enumerate(years)})
    frame["mover"] = frame["hh_id"].isin(movers).astype(int)
    frame = frame[list(SURVEY_COLUMNS)]

    truth = {
        "country": cfg.country,
        "planted_metric": cfg.planted_metric,
        "beta": cfg.beta,
        "beta2": cfg.beta2,
        "input_effects": dict(cfg.input_effects),
        "intercept_yield": intercept_y,
        "intercept_value": intercept_v,
        "year_effects": {str(y): gamma[y] for y in years},
        "hh_effect_sd": cfg.hh_effect_sd,
        "noise_sd": cfg.noise_sd,
        "n_movers": len(movers),
        "seed": cfg.seed,
    }
    return SurveyPanel(frame=frame, movers_excluded=0), truth


# --- merging ---


@dataclass
class MergedPanel:
    """Survey rows joined with wide metric columns, plus the drop log."""

    frame: pd.DataFrame
    drops: pd.DataFrame  # columns: hh_id, year, reason
    product_id: str = ""
    scheme: int = 0
    metric_ids: tuple[str, ...] = ()


def merge_weather(
    panel: SurveyPanel,
    metrics: pd.DataFrame,
    product_id: str,
    scheme: int,
    metric_ids: tuple[str, ...],
) -> MergedPanel:
    """Inner-join the requested metric columns onto household-year rows.

    Rows lacking a metric row, or whose metric is flagged missing, drop
    with a logged reason.  Mover rows drop likewise (defensive; the loader
    already excludes them).
    """
    frame = panel.frame.copy()
    drops: list[tuple[str, int, str]] = []
    if "mover" in frame.columns and (frame["mover"] == 1).any():
        for _, r in frame.loc[frame["mover"] == 1].iterrows():
            drops.append((r["hh_id"], int(r["year"]), "mover"))
        frame = frame.loc[frame["mover"] == 0]

    sel = metrics.loc[
        (metrics["product_id"] == product_id)
        & (metrics["scheme"].astype(int) == int(scheme))
        & metrics["metric_id"].isin(metric_ids)
    ]
    for mid in metric_ids:
        sub = sel.loc[sel["metric_id"] == mid]
        if sub.duplicated(subset=["hh_id", "year"]).any():
            raise AmbiguousJoin(
                f"duplicate metric rows for {mid!r} ({product_id}, scheme {scheme})"
            )
        keyed = sub.set_index([sub["hh_id"].astype(str), sub["year"].astype(int)])
        value = keyed["value"]
        flagged = keyed["missing_flag"].astype(int)
        idx = pd.MultiIndex.from_arrays(
            [frame["hh_id"].astype(str), frame["year"].astype(int)]
        )
        present = idx.isin(value.index)
        for hh, yr in idx[~present]:
            drops.append((hh, int(yr), f"no_metric:{mid}"))
        frame = frame.loc[present]
        idx = idx[present]
        col = value.reindex(idx).to_numpy(np.float64)
        flag = flagged.reindex(idx).to_numpy()
        bad = (flag == 1) | np.isnan(col)
        for (hh, yr) in idx[bad]:
            drops.append((hh, int(yr), f"missing_metric:{mid}"))
        frame = frame.loc[~bad].copy()
        frame[mid] = col[~bad]

    drop_frame = pd.DataFrame(drops, columns=["hh_id", "year", "reason"])
    return MergedPanel(
        frame=frame.reset_index(drop=True),
        drops=drop_frame,
        product_id=product_id,
        scheme=int(scheme),
        metric_ids=tuple(metric_ids),
    )
