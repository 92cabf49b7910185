"""The regression battery: enumerate, execute, aggregate.

A battery crosses countries x products x schemes x metrics x outcomes x
model forms into single-metric runs, then appends rain+temp combination
runs.  Enumeration order is a fixed set of nested loops in config order,
and results serialize in that order regardless of how many workers
executed them, so results.csv is byte-identical across parallelism widths.
Failed runs are first-class rows carrying an error code.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields as dc_fields
from typing import Callable, Iterable, Protocol

import numpy as np
import pandas as pd
from scipy import stats as sps

from .econometrics import (
    LINEAR_MODELS,
    MODEL_NAMES,
    QUADRATIC_MODELS,
    fit_model,
    make_spec,
)
from .errors import (
    AgweatherError,
    EmptyDimension,
    EmptyGroup,
    MissingReference,
    ProviderUnavailable,
)

SIGNIFICANCE_LEVELS = (0.90, 0.95, 0.99)
P_RULES = ("joint", "linear", "either")

#: reference metric per family for the difference tests
REFERENCE_METRICS = {"rain": "rain_mean", "temp": "temp_mean"}


@dataclass(frozen=True, order=True)
class RunKey:
    country: str
    products: tuple[str, ...]
    scheme: int
    metrics: tuple[str, ...]
    outcome: str
    spec: str  # model form name

    def products_label(self) -> str:
        return "+".join(self.products)

    def metrics_label(self) -> str:
        return "+".join(self.metrics)


@dataclass(frozen=True)
class CombinationBlock:
    """A rain+temp metric pairing estimated jointly (same scheme both sides)."""

    name: str
    rain_metrics: tuple[str, ...]
    temp_metrics: tuple[str, ...]
    quadratic: bool = False

    def model_names(self, allowed: tuple[str, ...]) -> list[str]:
        out = [m for m in LINEAR_MODELS if m in allowed]
        if self.quadratic:
            out.extend(m for m in QUADRATIC_MODELS if m in allowed)
        return out


#: the combination set used at paper scope: four named pairs plus the
#: two- and three-moment pairings, with two of them also quadratic
PAPER_COMBINATION_BLOCKS = (
    CombinationBlock("mean_mean", ("rain_mean",), ("temp_mean",), quadratic=True),
    CombinationBlock("median_median", ("rain_median",), ("temp_median",)),
    CombinationBlock("total_gdd", ("rain_total",), ("temp_gdd",), quadratic=True),
    CombinationBlock("ztotal_zgdd", ("rain_z_total",), ("temp_z_gdd",)),
    CombinationBlock(
        "two_moment",
        ("rain_mean", "rain_variance"),
        ("temp_mean", "temp_variance"),
    ),
    CombinationBlock(
        "three_moment",
        ("rain_mean", "rain_variance", "rain_skew"),
        ("temp_mean", "temp_variance", "temp_skew"),
    ),
)

DEFAULT_SCHEMES = (3,)
DEFAULT_OUTCOMES = ("primary_crop_yield", "total_farm_value")


@dataclass(frozen=True)
class BatteryConfig:
    countries: tuple[str, ...]
    rain_products: tuple[str, ...] = ()
    temp_products: tuple[str, ...] = ()
    schemes: tuple[int, ...] = DEFAULT_SCHEMES
    rain_metrics: tuple[str, ...] = ()
    temp_metrics: tuple[str, ...] = ()
    outcomes: tuple[str, ...] = DEFAULT_OUTCOMES
    models: tuple[str, ...] = MODEL_NAMES
    combination_blocks: tuple[CombinationBlock, ...] = ()
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        for name, vals in (
            ("countries", self.countries),
            ("schemes", self.schemes),
            ("outcomes", self.outcomes),
            ("specs", self.models),
        ):
            if not vals:
                raise EmptyDimension(f"config dimension {name!r} is empty")
        if not (self.rain_metrics or self.temp_metrics or self.combination_blocks):
            raise EmptyDimension("config names no metrics and no combination blocks")
        bad = [m for m in self.models if m not in MODEL_NAMES]
        if bad:
            raise ValueError(f"unknown model names {bad}")
        bad_s = [s for s in self.schemes if not 1 <= int(s) <= 10]
        if bad_s:
            raise ValueError(f"scheme numbers out of range: {bad_s}")


def enumerate_runs(config: BatteryConfig) -> list[RunKey]:
    """Deterministic battery order.

    Single-metric runs first: country, family (rain then temp), product,
    scheme, metric, outcome, model, all in config order.  Combination runs
    append afterwards: country, rain product, temp product, scheme, block,
    outcome, model.
    """
    keys: list[RunKey] = []
    families = (
        (config.rain_products, config.rain_metrics),
        (config.temp_products, config.temp_metrics),
    )
    for country in config.countries:
        for products, metrics in families:
            for product in products:
                for scheme in config.schemes:
                    for metric in metrics:
                        for outcome in config.outcomes:
                            for model in config.models:
                                keys.append(RunKey(
                                    country=country,
                                    products=(product,),
                                    scheme=int(scheme),
                                    metrics=(metric,),
                                    outcome=outcome,
                                    spec=model,
                                ))
    for country in config.countries:
        for rain_p in config.rain_products:
            for temp_p in config.temp_products:
                for scheme in config.schemes:
                    for block in config.combination_blocks:
                        for outcome in config.outcomes:
                            for model in block.model_names(config.models):
                                keys.append(RunKey(
                                    country=country,
                                    products=(rain_p, temp_p),
                                    scheme=int(scheme),
                                    metrics=block.rain_metrics + block.temp_metrics,
                                    outcome=outcome,
                                    spec=model,
                                ))
    if not keys:
        raise EmptyDimension("configuration produces no runs")
    return keys


@dataclass
class ResultRow:
    key: RunKey
    beta1: float = float("nan")
    beta2: float = float("nan")
    se1: float = float("nan")
    se2: float = float("nan")
    p1: float = float("nan")
    p2: float = float("nan")
    p_joint: float = float("nan")
    adj_r2: float = float("nan")
    n: int | None = None
    g: int | None = None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class DataProvider(Protocol):
    """Supplies the merged household-year frame for one battery cell.

    Must be safe for concurrent calls; raise ProviderUnavailable when the
    cell's inputs cannot be resolved at all (fatal for the batch).
    """

    def frame_for(
        self, country: str, products: tuple[str, ...], scheme: int,
        metrics: tuple[str, ...],
    ) -> pd.DataFrame: ...


def execute_run(key: RunKey, provider: DataProvider) -> ResultRow:
    """Fit one run; per-run failures become the row's status, never raise."""
    try:
        frame = provider.frame_for(key.country, key.products, key.scheme, key.metrics)
        spec = make_spec(key.spec, key.metrics, key.outcome)
        fit = fit_model(frame, spec)
    except ProviderUnavailable:
        raise
    except (AgweatherError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return ResultRow(key=key, status=type(exc).__name__)
    w = fit.weather_names
    i1 = fit.term(w[0])
    row = ResultRow(
        key=key,
        beta1=float(fit.beta[i1]),
        se1=float(fit.se[i1]),
        p1=float(fit.p[i1]),
        p_joint=float(fit.p_joint),
        adj_r2=float(fit.adj_r2),
        n=fit.n,
        g=fit.g,
    )
    if len(w) > 1:
        i2 = fit.term(w[1])
        row.beta2 = float(fit.beta[i2])
        row.se2 = float(fit.se[i2])
        row.p2 = float(fit.p[i2])
    return row


def run_battery(
    config: BatteryConfig,
    provider: DataProvider,
    threads: int | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> list[ResultRow]:
    """Execute every enumerated run; output order is the enumeration order.

    Parallelism width comes from (in priority order) the ``threads``
    argument, the AGW_THREADS environment variable, then config.threads.
    Results are invariant to the width.
    """
    keys = enumerate_runs(config)
    if threads is None:
        env = os.environ.get("AGW_THREADS")
        threads = int(env) if env else config.threads
    threads = max(1, int(threads))
    results: list[ResultRow | None] = [None] * len(keys)

    def work(i: int) -> None:
        results[i] = execute_run(keys[i], provider)
        if progress is not None:
            progress(i, len(keys))

    if threads == 1:
        for i in range(len(keys)):
            work(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(len(keys))))
    return results  # type: ignore[return-value]


# --- serialization ---

RESULT_COLUMNS = (
    "country", "products", "scheme", "metrics", "outcome", "spec",
    "beta1", "beta2", "se1", "se2", "p1", "p2", "p_joint", "adj_r2",
    "n", "g", "status",
)


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def result_record(row: ResultRow) -> list[str]:
    k = row.key
    return [
        k.country,
        k.products_label(),
        str(k.scheme),
        k.metrics_label(),
        k.outcome,
        k.spec,
        _fmt(row.beta1),
        _fmt(row.beta2),
        _fmt(row.se1),
        _fmt(row.se2),
        _fmt(row.p1),
        _fmt(row.p2),
        _fmt(row.p_joint),
        _fmt(row.adj_r2),
        "" if row.n is None else str(int(row.n)),
        "" if row.g is None else str(int(row.g)),
        row.status,
    ]


def results_to_csv_text(rows: Iterable[ResultRow]) -> str:
    lines = [",".join(RESULT_COLUMNS)]
    for row in rows:
        lines.append(",".join(result_record(row)))
    return "\n".join(lines) + "\n"


def read_results_csv(path) -> list[ResultRow]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in RESULT_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing results columns {missing}")
    out = []
    for rec in frame.itertuples(index=False):
        key = RunKey(
            country=rec.country,
            products=tuple(rec.products.split("+")),
            scheme=int(rec.scheme),
            metrics=tuple(rec.metrics.split("+")),
            outcome=rec.outcome,
            spec=rec.spec,
        )
        def num(s):
            return float(s) if s != "" else float("nan")
        out.append(ResultRow(
            key=key,
            beta1=num(rec.beta1), beta2=num(rec.beta2),
            se1=num(rec.se1), se2=num(rec.se2),
            p1=num(rec.p1), p2=num(rec.p2),
            p_joint=num(rec.p_joint), adj_r2=num(rec.adj_r2),
            n=int(rec.n) if rec.n != "" else None,
            g=int(rec.g) if rec.g != "" else None,
            status=rec.status,
        ))
    return out


# --- aggregation helpers ---


def effective_p(row: ResultRow, p_rule: str = "joint") -> float:
    """The per-run significance p under the chosen rule."""
    if p_rule == "joint":
        return row.p_joint
    if p_rule == "linear":
        return row.p1
    if p_rule == "either":
        if math.isnan(row.p2):
            return row.p1
        return min(row.p1, row.p2)
    raise ValueError(f"unknown p rule {p_rule!r}; expected one of {P_RULES}")


def _key_field(row: ResultRow, name: str) -> str:
    k = row.key
    if name == "products":
        return k.products_label()
    if name == "metrics":
        return k.metrics_label()
    if name == "scheme":
        return str(k.scheme)
    return str(getattr(k, name))


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial share."""
    if n <= 0:
        raise ValueError("interval needs n > 0")
    z = float(sps.norm.ppf(0.5 + confidence / 2.0))
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    # the ends are exact (lower hits 0 at k=0, upper hits 1 at k=n) but the
    # sqrt rounds differently from the center term, so pin them
    lower = 0.0 if k == 0 else max(0.0, center - half)
    upper = 1.0 if k == n else min(1.0, center + half)
    return lower, upper


def _grouped(rows: Iterable[ResultRow], group_by: tuple[str, ...]):
    groups: dict[tuple[str, ...], list[ResultRow]] = {}
    for row in rows:
        key = tuple(_key_field(row, f) for f in group_by)
        groups.setdefault(key, []).append(row)
    return groups


def significance_shares(
    rows: Iterable[ResultRow],
    group_by: tuple[str, ...] = ("scheme",),
    levels: tuple[float, ...] = SIGNIFICANCE_LEVELS,
    p_rule: str = "joint",
) -> pd.DataFrame:
    """Share of runs significant at each level, with Wilson 95% CIs.

    Errored rows leave the denominator but are counted per group.
    """
    records = []
    for gkey, members in _grouped(rows, group_by).items():
        ok = [r for r in members if r.ok]
        n_err = len(members) - len(ok)
        if not ok:
            raise EmptyGroup(f"group {dict(zip(group_by, gkey))} has no ok rows")
        ps = np.array([effective_p(r, p_rule) for r in ok])
        for level in levels:
            hits = int((ps < (1.0 - level)).sum())
            lo, hi = wilson_interval(hits, len(ok))
            records.append(
                dict(zip(group_by, gkey))
                | {
                    "level": level,
                    "share": hits / len(ok),
                    "lower": lo,
                    "upper": hi,
                    "n_ok": len(ok),
                    "n_err": n_err,
                }
            )
    return pd.DataFrame.from_records(records)


@dataclass(frozen=True)
class EstimateCI:
    estimate: float
    lower: float
    upper: float

    def __post_init__(self):
        if not (self.lower <= self.estimate <= self.upper):
            raise ValueError("require lower <= estimate <= upper")


def weak_test(a: EstimateCI, b: EstimateCI) -> bool:
    """a's point estimate falls outside b's closed interval."""
    return a.estimate < b.lower or a.estimate > b.upper


def strong_test(a: EstimateCI, b: EstimateCI) -> bool:
    """Weak difference and the closed intervals do not overlap at all."""
    disjoint = a.upper < b.lower or b.upper < a.lower
    return weak_test(a, b) and disjoint


def row_ci(row: ResultRow, confidence: float = 0.95) -> EstimateCI:
    """t-based CI on beta1 with G-1 degrees of freedom."""
    dof = (row.g or 2) - 1
    crit = float(sps.t.ppf(0.5 + confidence / 2.0, dof))
    return EstimateCI(
        estimate=row.beta1,
        lower=row.beta1 - crit * row.se1,
        upper=row.beta1 + crit * row.se1,
    )


def reference_comparison(
    rows: Iterable[ResultRow],
    reference_metrics: dict[str, str] = REFERENCE_METRICS,
) -> pd.DataFrame:
    """Weak/strong verdicts of each single metric against its family reference.

    Comparisons happen inside (country, product, scheme, outcome, spec)
    cells so both estimates share data and obfuscation; the per-metric
    verdict is the majority across cells, reported with counts.
    """
    singles = [r for r in rows if r.ok and len(r.key.metrics) == 1]
    refs: dict[tuple, EstimateCI] = {}
    for r in singles:
        metric = r.key.metrics[0]
        if metric in reference_metrics.values():
            cell = (r.key.country, r.key.products, r.key.scheme, r.key.outcome, r.key.spec)
            refs[cell] = row_ci(r)
    if not refs:
        raise MissingReference("no reference-metric rows present")
    records: dict[str, dict] = {}
    for r in singles:
        metric = r.key.metrics[0]
        family = metric.split("_", 1)[0]
        ref_metric = reference_metrics.get(family)
        if ref_metric is None or metric == ref_metric:
            continue
        cell = (r.key.country, r.key.products, r.key.scheme, r.key.outcome, r.key.spec)
        if cell not in refs:
            raise MissingReference(
                f"no {ref_metric} row for cell {cell} needed by {metric}"
            )
        a = row_ci(r)
        b = refs[cell]
        rec = records.setdefault(
            metric, {"metric": metric, "reference": ref_metric,
                     "n_cells": 0, "n_weak": 0, "n_strong": 0}
        )
        rec["n_cells"] += 1
        rec["n_weak"] += int(weak_test(a, b))
        rec["n_strong"] += int(strong_test(a, b))
    out = []
    for metric in sorted(records):
        rec = records[metric]
        rec["weak"] = rec["n_weak"] * 2 > rec["n_cells"]
        rec["strong"] = rec["n_strong"] * 2 > rec["n_cells"]
        out.append(rec)
    return pd.DataFrame.from_records(out)


def spec_curve_export(
    rows: list[ResultRow],
    filters: dict[str, object] | None = None,
    confidence: float = 0.95,
    p_rule: str = "joint",
) -> pd.DataFrame:
    """Ok rows sorted by beta1 ascending (ties keep battery order)."""
    filters = filters or {}
    kept = []
    for row in rows:
        if not row.ok:
            continue
        match = True
        for fieldname, allowed in filters.items():
            value = _key_field(row, fieldname)
            if isinstance(allowed, (set, frozenset, list, tuple)):
                match = value in {str(a) for a in allowed}
            else:
                match = value == str(allowed)
            if not match:
                break
        if match:
            kept.append(row)
    if not kept:
        raise EmptyGroup("no rows left after filtering")
    order = sorted(range(len(kept)), key=lambda i: (kept[i].beta1, i))
    records = []
    for rank, i in enumerate(order, start=1):
        row = kept[i]
        ci = row_ci(row, confidence)
        records.append({
            "rank": rank,
            "country": row.key.country,
            "products": row.key.products_label(),
            "scheme": row.key.scheme,
            "metrics": row.key.metrics_label(),
            "outcome": row.key.outcome,
            "spec": row.key.spec,
            "beta1": row.beta1,
            "lower": ci.lower,
            "upper": ci.upper,
            "significant": effective_p(row, p_rule) < 1.0 - confidence,
        })
    return pd.DataFrame.from_records(records)


def r2_summary(
    rows: Iterable[ResultRow],
    group_by: tuple[str, ...] = ("scheme", "spec"),
    confidence: float = 0.95,
) -> pd.DataFrame:
    """Mean adjusted R2 per group with a t-based CI; needs >= 2 ok rows."""
    records = []
    for gkey, members in _grouped(rows, group_by).items():
        vals = np.array([r.adj_r2 for r in members if r.ok and not math.isnan(r.adj_r2)])
        if vals.size < 2:
            raise EmptyGroup(
                f"group {dict(zip(group_by, gkey))} has {vals.size} usable rows"
            )
        mean = float(vals.mean())
        sd = float(vals.std(ddof=1))
        crit = float(sps.t.ppf(0.5 + confidence / 2.0, vals.size - 1))
        half = crit * sd / math.sqrt(vals.size)
        records.append(
            dict(zip(group_by, gkey))
            | {"mean_adj_r2": mean, "lower": mean - half, "upper": mean + half,
               "n": int(vals.size)}
        )
    return pd.DataFrame.from_records(records)
