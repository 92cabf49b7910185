"""Battery enumeration, execution, and aggregation tests."""

import itertools
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agweather.battery import (
    PAPER_COMBINATION_BLOCKS,
    BatteryConfig,
    CombinationBlock,
    EstimateCI,
    ResultRow,
    RunKey,
    effective_p,
    enumerate_runs,
    r2_summary,
    read_results_csv,
    reference_comparison,
    results_to_csv_text,
    row_ci,
    run_battery,
    significance_shares,
    spec_curve_export,
    strong_test,
    weak_test,
    wilson_interval,
)
from agweather.errors import (
    EmptyDimension,
    EmptyGroup,
    MissingReference,
    ProviderUnavailable,
)
from agweather.weather_metrics import RAIN_METRICS, TEMP_METRICS

COUNTRIES = ("ethiopia", "malawi", "niger", "nigeria", "tanzania", "uganda")
RAIN_PRODUCTS = ("rf1", "rf2", "rf3", "rf4", "rf5", "rf6")
TEMP_PRODUCTS = ("tp1", "tp2", "tp3")
LINEAR = ("lin", "lin_fe", "lin_fe_ctrl")
QUADRATIC = ("quad", "quad_fe", "quad_fe_ctrl")


def paper_scope_config() -> BatteryConfig:
    return BatteryConfig(
        countries=COUNTRIES,
        rain_products=RAIN_PRODUCTS,
        temp_products=TEMP_PRODUCTS,
        schemes=tuple(range(1, 11)),
        rain_metrics=RAIN_METRICS,
        temp_metrics=TEMP_METRICS,
        combination_blocks=PAPER_COMBINATION_BLOCKS,
    )


# --- enumeration ---


def oracle_keys(cfg: BatteryConfig) -> tuple[int, set]:
    """Brute-force re-derivation with a different loop construction."""
    singles = set()
    for fam_products, fam_metrics in (
        (cfg.rain_products, cfg.rain_metrics),
        (cfg.temp_products, cfg.temp_metrics),
    ):
        for c, p, s, m, o, f in itertools.product(
            cfg.countries, fam_products, cfg.schemes, fam_metrics,
            cfg.outcomes, cfg.models,
        ):
            singles.add(RunKey(c, (p,), int(s), (m,), o, f))
    combos = set()
    for c, rp, tp, s, b, o in itertools.product(
        cfg.countries, cfg.rain_products, cfg.temp_products, cfg.schemes,
        cfg.combination_blocks, cfg.outcomes,
    ):
        forms = [f for f in LINEAR if f in cfg.models]
        if b.quadratic:
            forms += [f for f in QUADRATIC if f in cfg.models]
        for f in forms:
            combos.add(RunKey(c, (rp, tp), int(s), b.rain_metrics + b.temp_metrics, o, f))
    return len(singles) + len(combos), singles | combos


def test_paper_scope_counts():
    keys = enumerate_runs(paper_scope_config())
    singles = [k for k in keys if len(k.products) == 1]
    combos = [k for k in keys if len(k.products) == 2]
    # (14 rain metrics x 6 products + 8 temp metrics x 3 products)
    #   x 6 countries x 10 schemes x 2 outcomes x 6 model forms
    assert len(singles) == (14 * 6 + 8 * 3) * 6 * 10 * 2 * 6 == 77760
    # 24 block-model variants per (country, rain product, temp product,
    # scheme, outcome) cell
    assert len(combos) == 24 * 6 * 6 * 3 * 10 * 2 == 51840
    assert len(keys) == 129600
    assert len(set(keys)) == len(keys)


def test_singles_precede_combinations():
    keys = enumerate_runs(paper_scope_config())
    widths = [len(k.products) for k in keys]
    assert widths == sorted(widths)


def test_enumeration_order_small_config():
    cfg = BatteryConfig(
        countries=("malawi", "ethiopia"),
        rain_products=("rf2",),
        temp_products=("tp1",),
        schemes=(3, 1),
        rain_metrics=("rain_total",),
        temp_metrics=("temp_gdd",),
        outcomes=("primary_crop_yield",),
        models=("lin", "quad"),
        combination_blocks=(CombinationBlock("tg", ("rain_total",), ("temp_gdd",), True),),
    )
    keys = enumerate_runs(cfg)
    # country-major; within country rain family then temp family; scheme
    # order as configured; combination block appended after all singles
    assert keys[0] == RunKey("malawi", ("rf2",), 3, ("rain_total",), "primary_crop_yield", "lin")
    assert keys[1] == RunKey("malawi", ("rf2",), 3, ("rain_total",), "primary_crop_yield", "quad")
    assert keys[2].scheme == 1
    assert keys[4] == RunKey("malawi", ("tp1",), 3, ("temp_gdd",), "primary_crop_yield", "lin")
    assert keys[8] == RunKey("ethiopia", ("rf2",), 3, ("rain_total",), "primary_crop_yield", "lin")
    combo = keys[16]
    assert combo.products == ("rf2", "tp1")
    assert combo.metrics == ("rain_total", "temp_gdd")
    assert combo.spec == "lin"
    assert len(keys) == 16 + 2 * 2 * 2  # 2 countries x 2 schemes x 2 forms
    n_oracle, key_oracle = oracle_keys(cfg)
    assert len(keys) == n_oracle and set(keys) == key_oracle


@given(st.data())
@settings(max_examples=50, deadline=None)
def test_enumeration_matches_bruteforce_oracle(data):
    draw_subset = lambda pool, min_size=0: tuple(
        data.draw(st.lists(st.sampled_from(pool), min_size=min_size,
                           max_size=len(pool), unique=True))
    )
    rain_m = draw_subset(RAIN_METRICS)
    temp_m = draw_subset(TEMP_METRICS)
    blocks = tuple(
        PAPER_COMBINATION_BLOCKS[i]
        for i in sorted(data.draw(st.sets(st.integers(0, 5), max_size=6)))
    )
    if not (rain_m or temp_m or blocks):
        rain_m = ("rain_mean",)
    cfg = BatteryConfig(
        countries=draw_subset(COUNTRIES, min_size=1),
        rain_products=draw_subset(RAIN_PRODUCTS),
        temp_products=draw_subset(TEMP_PRODUCTS),
        schemes=draw_subset(tuple(range(1, 11)), min_size=1),
        rain_metrics=rain_m,
        temp_metrics=temp_m,
        outcomes=draw_subset(("primary_crop_yield", "total_farm_value"), min_size=1),
        models=draw_subset(LINEAR + QUADRATIC, min_size=1),
        combination_blocks=blocks,
    )
    n_expected, expected = oracle_keys(cfg)
    if n_expected == 0:
        with pytest.raises(EmptyDimension):
            enumerate_runs(cfg)
        return
    keys = enumerate_runs(cfg)
    assert len(keys) == n_expected
    assert set(keys) == expected
    assert len(set(keys)) == len(keys)


def test_empty_dimensions_rejected():
    with pytest.raises(EmptyDimension):
        BatteryConfig(countries=(), rain_metrics=("rain_mean",))
    with pytest.raises(EmptyDimension):
        BatteryConfig(countries=("malawi",), rain_metrics=("rain_mean",), schemes=())
    with pytest.raises(EmptyDimension):
        BatteryConfig(countries=("malawi",), rain_metrics=("rain_mean",), outcomes=())
    with pytest.raises(EmptyDimension):
        BatteryConfig(countries=("malawi",), rain_metrics=("rain_mean",), models=())
    with pytest.raises(EmptyDimension):
        # no metrics anywhere
        BatteryConfig(countries=("malawi",))
    with pytest.raises(EmptyDimension):
        # metrics named but no products to carry them
        enumerate_runs(BatteryConfig(countries=("malawi",), rain_metrics=("rain_mean",)))


def test_config_validation():
    with pytest.raises(ValueError):
        BatteryConfig(countries=("malawi",), rain_metrics=("rain_mean",),
                      models=("lin", "cubic"))
    with pytest.raises(ValueError):
        BatteryConfig(countries=("malawi",), rain_metrics=("rain_mean",),
                      schemes=(0,))
    assert BatteryConfig(countries=("malawi",), rain_metrics=("rain_mean",)).schemes == (3,)


# --- execution ---


def synth_merged_frame(seed=7, n_households=40, years=(2010, 2012, 2014),
                       nan_metric=None):
    rng = np.random.default_rng(seed)
    rows = []
    for h in range(n_households):
        alpha = rng.normal(0, 0.5)
        for year in years:
            rain_mean = rng.normal(6.0, 1.5)
            temp_mean = rng.normal(24.0, 2.0)
            signal = 0.4 * rain_mean - 0.05 * temp_mean + alpha + 0.02 * (year - 2010)
            rows.append({
                "country": "malawi",
                "hh_id": f"h{h:03d}",
                "ea_id": f"e{h % 8}",
                "admin_id": "a0",
                "year": year,
                "wave": 1 + years.index(year),
                "primary_crop_yield": float(np.sinh(signal + rng.normal(0, 0.3)) + 2) ** 2,
                "total_farm_value": float(np.sinh(0.8 * signal + rng.normal(0, 0.3)) + 2) ** 2,
                "labor_rate": float(rng.gamma(2.0, 100.0)),
                "fertilizer_rate": float(rng.gamma(1.0, 40.0)),
                "seed_rate": float(rng.gamma(2.0, 12.0)),
                "pesticide": int(rng.uniform() < 0.1),
                "herbicide": int(rng.uniform() < 0.1),
                "irrigation": int(rng.uniform() < 0.05),
                "mover": 0,
                "rain_mean": rain_mean,
                "rain_total": rain_mean * 120.0 + rng.normal(0, 5),
                "rain_skew": np.nan if nan_metric == "rain_skew" else rng.normal(1.2, 0.2),
                "temp_mean": temp_mean,
                "temp_gdd": float(np.clip(100 + 5 * temp_mean + rng.normal(0, 3), 0, None)),
            })
    return pd.DataFrame(rows)


class FrameProvider:
    """Hands the same merged frame to every cell; counts calls."""

    def __init__(self, frame, fail_country=None):
        self.frame = frame
        self.fail_country = fail_country
        self.calls = 0

    def frame_for(self, country, products, scheme, metrics):
        self.calls += 1
        if country == self.fail_country:
            raise ProviderUnavailable(f"no data staged for {country}")
        return self.frame


def small_battery_config(**overrides):
    base = dict(
        countries=("malawi",),
        rain_products=("rf1",),
        temp_products=("tp1",),
        schemes=(3,),
        rain_metrics=("rain_mean", "rain_total"),
        temp_metrics=("temp_mean",),
        outcomes=("primary_crop_yield", "total_farm_value"),
        combination_blocks=(
            CombinationBlock("mean_mean", ("rain_mean",), ("temp_mean",), True),
        ),
    )
    base.update(overrides)
    return BatteryConfig(**base)


def test_run_battery_row_per_key_in_order():
    cfg = small_battery_config()
    provider = FrameProvider(synth_merged_frame())
    rows = run_battery(cfg, provider)
    keys = enumerate_runs(cfg)
    assert [r.key for r in rows] == keys
    assert len(rows) == (2 + 1) * 2 * 6 + 6 * 2  # 36 singles + 12 combos
    assert all(r.status == "ok" for r in rows)
    for r in rows:
        assert r.n == 120 and math.isfinite(r.beta1) and math.isfinite(r.p_joint)
        if r.key.spec.startswith("quad") or len(r.key.metrics) > 1:
            assert math.isfinite(r.beta2) and math.isfinite(r.p2)
        elif len(r.key.metrics) == 1:
            assert math.isnan(r.beta2) and math.isnan(r.p2)


def test_run_battery_matches_direct_fit():
    from agweather.econometrics import fit_model, make_spec

    cfg = small_battery_config()
    frame = synth_merged_frame()
    rows = run_battery(cfg, FrameProvider(frame))
    probe = next(r for r in rows
                 if r.key.spec == "quad_fe_ctrl" and r.key.metrics == ("rain_total",)
                 and r.key.outcome == "total_farm_value")
    fit = fit_model(frame, make_spec("quad_fe_ctrl", ("rain_total",), "total_farm_value"))
    i1 = fit.term(fit.weather_names[0])
    i2 = fit.term(fit.weather_names[1])
    assert probe.beta1 == pytest.approx(fit.beta[i1], rel=0, abs=0)
    assert probe.beta2 == pytest.approx(fit.beta[i2], rel=0, abs=0)
    assert probe.p_joint == fit.p_joint
    assert probe.adj_r2 == fit.adj_r2
    assert probe.g == fit.g


def test_run_battery_identical_across_widths(monkeypatch):
    cfg = small_battery_config()
    frame = synth_merged_frame()
    text1 = results_to_csv_text(run_battery(cfg, FrameProvider(frame), threads=1))
    text8 = results_to_csv_text(run_battery(cfg, FrameProvider(frame), threads=8))
    assert text1 == text8
    monkeypatch.setenv("AGW_THREADS", "3")
    text_env = results_to_csv_text(run_battery(cfg, FrameProvider(frame)))
    assert text_env == text1


def test_failed_runs_are_rows_not_exceptions():
    cfg = small_battery_config(rain_metrics=("rain_mean", "rain_skew"))
    frame = synth_merged_frame(nan_metric="rain_skew")
    rows = run_battery(cfg, FrameProvider(frame))
    bad = [r for r in rows if r.key.metrics == ("rain_skew",)]
    good = [r for r in rows if r.key.metrics != ("rain_skew",)]
    assert len(bad) == 12
    assert all(r.status == "AllMissingMetric" for r in bad)
    assert all(math.isnan(r.beta1) and r.n is None for r in bad)
    assert all(r.status == "ok" for r in good)


def test_provider_unavailable_is_fatal():
    cfg = small_battery_config()
    provider = FrameProvider(synth_merged_frame(), fail_country="malawi")
    with pytest.raises(ProviderUnavailable):
        run_battery(cfg, provider)


def test_results_csv_format_and_roundtrip(tmp_path):
    cfg = small_battery_config(rain_metrics=("rain_mean", "rain_skew"))
    frame = synth_merged_frame(nan_metric="rain_skew")
    rows = run_battery(cfg, FrameProvider(frame))
    text = results_to_csv_text(rows)
    lines = text.splitlines()
    assert lines[0] == ("country,products,scheme,metrics,outcome,spec,"
                        "beta1,beta2,se1,se2,p1,p2,p_joint,adj_r2,n,g,status")
    assert len(lines) == 1 + len(rows)
    first = lines[1].split(",")
    assert first[:6] == ["malawi", "rf1", "3", "rain_mean", "primary_crop_yield", "lin"]
    assert float(first[6]) == rows[0].beta1  # repr round-trips
    assert first[7] == ""  # no quadratic term in a linear single run
    assert first[-1] == "ok"
    combo_line = lines[1 + len(rows) - 1].split(",")
    assert combo_line[1] == "rf1+tp1" and combo_line[3] == "rain_mean+temp_mean"
    failed = next(l for l in lines[1:] if l.endswith("AllMissingMetric"))
    assert failed.split(",")[6:16] == [""] * 10

    path = tmp_path / "results.csv"
    path.write_text(text)
    back = read_results_csv(path)
    assert [r.key for r in back] == [r.key for r in rows]
    assert results_to_csv_text(back) == text


# --- aggregation ---


def make_row(beta1=0.0, se1=1.0, p1=0.5, p2=float("nan"), p_joint=0.5,
             adj_r2=0.2, g=30, n=90, status="ok", scheme=3, metric="rain_mean",
             country="malawi", product="rf1", outcome="primary_crop_yield",
             spec="lin", beta2=float("nan"), se2=float("nan")):
    key = RunKey(country, (product,), scheme, (metric,), outcome, spec)
    return ResultRow(key=key, beta1=beta1, beta2=beta2, se1=se1, se2=se2,
                     p1=p1, p2=p2, p_joint=p_joint, adj_r2=adj_r2,
                     n=n, g=g, status=status)


def test_wilson_interval_known_value():
    lo, hi = wilson_interval(4, 10)
    assert lo == pytest.approx(0.168, abs=1e-3)
    assert hi == pytest.approx(0.687, abs=1e-3)


@given(st.integers(0, 50), st.integers(1, 50))
def test_wilson_interval_brackets_share(k, n):
    k = min(k, n)
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_significance_shares_counts_and_rule():
    rows = (
        [make_row(p_joint=0.005, p1=0.5, scheme=1) for _ in range(4)]
        + [make_row(p_joint=0.5, p1=0.005, scheme=1) for _ in range(6)]
        + [make_row(status="RankDeficient", scheme=1) for _ in range(3)]
    )
    out = significance_shares(rows, group_by=("scheme",), levels=(0.95,))
    rec = out.iloc[0]
    assert rec["scheme"] == "1" and rec["n_ok"] == 10 and rec["n_err"] == 3
    assert rec["share"] == pytest.approx(0.4)
    assert rec["lower"] == pytest.approx(0.168, abs=1e-3)
    assert rec["upper"] == pytest.approx(0.687, abs=1e-3)
    lin = significance_shares(rows, group_by=("scheme",), levels=(0.95,), p_rule="linear")
    assert lin.iloc[0]["share"] == pytest.approx(0.6)


def test_significance_shares_either_rule_and_levels():
    rows = [
        make_row(p1=0.2, p2=0.04, p_joint=0.2),
        make_row(p1=0.04, p2=float("nan"), p_joint=0.2),
        make_row(p1=0.2, p2=0.2, p_joint=0.04),
    ]
    out = significance_shares(rows, group_by=(), levels=(0.95,), p_rule="either")
    assert out.iloc[0]["share"] == pytest.approx(2 / 3)
    multi = significance_shares(rows, group_by=(), levels=(0.90, 0.95, 0.99))
    assert list(multi["level"]) == [0.90, 0.95, 0.99]


def test_significance_shares_empty_group():
    rows = [make_row(status="NoVariation")]
    with pytest.raises(EmptyGroup):
        significance_shares(rows)
    with pytest.raises(ValueError):
        significance_shares([make_row()], p_rule="bonferroni")


def test_effective_p_rules():
    row = make_row(p1=0.3, p2=0.1, p_joint=0.2)
    assert effective_p(row, "joint") == 0.2
    assert effective_p(row, "linear") == 0.3
    assert effective_p(row, "either") == 0.1
    assert effective_p(make_row(p1=0.3, p_joint=0.2), "either") == 0.3


def test_weak_strong_truth_table():
    b = EstimateCI(0.7, 0.3, 0.9)
    inside = EstimateCI(0.5, 0.4, 0.6)
    at_edge = EstimateCI(0.3, 0.1, 0.5)       # estimate on b's closed bound
    overlap_out = EstimateCI(0.2, 0.0, 0.4)   # outside but intervals touch
    touch_out = EstimateCI(0.1, 0.0, 0.3)     # outside, upper == b.lower
    clear_out = EstimateCI(0.1, 0.0, 0.2)
    assert not weak_test(inside, b) and not strong_test(inside, b)
    assert not weak_test(at_edge, b)
    assert weak_test(overlap_out, b) and not strong_test(overlap_out, b)
    assert weak_test(touch_out, b) and not strong_test(touch_out, b)
    assert weak_test(clear_out, b) and strong_test(clear_out, b)
    above = EstimateCI(1.2, 1.0, 1.4)
    assert weak_test(above, b) and strong_test(above, b)
    with pytest.raises(ValueError):
        EstimateCI(0.1, 0.2, 0.3)


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_strong_implies_weak(vals):
    xs = sorted(vals)
    a = EstimateCI(sorted(vals[:3])[1], xs[0], xs[-1])
    a = EstimateCI(min(max(vals[0], xs[0]), xs[-1]), xs[0], xs[-1])
    b_vals = sorted(vals[3:])
    b = EstimateCI(b_vals[1], b_vals[0], b_vals[2])
    if strong_test(a, b):
        assert weak_test(a, b)
    if strong_test(b, a):
        assert weak_test(b, a)


def test_row_ci_uses_cluster_dof():
    from scipy import stats as sps
    row = make_row(beta1=1.0, se1=0.5, g=4)
    ci = row_ci(row)
    crit = sps.t.ppf(0.975, 3)
    assert ci.lower == pytest.approx(1.0 - crit * 0.5)
    assert ci.upper == pytest.approx(1.0 + crit * 0.5)


def test_reference_comparison_majority():
    rows = []
    for outcome in ("primary_crop_yield", "total_farm_value"):
        rows.append(make_row(metric="rain_mean", beta1=0.0, se1=0.1, g=20, outcome=outcome))
        rows.append(make_row(metric="rain_days", beta1=5.0, se1=0.1, g=20, outcome=outcome))
        rows.append(make_row(metric="rain_total", beta1=0.05, se1=0.1, g=20, outcome=outcome))
        rows.append(make_row(metric="temp_mean", beta1=0.0, se1=0.1, g=20, outcome=outcome))
        rows.append(make_row(metric="temp_gdd", beta1=-4.0, se1=0.1, g=20, outcome=outcome))
    out = reference_comparison(rows).set_index("metric")
    assert out.loc["rain_days", "n_cells"] == 2
    assert bool(out.loc["rain_days", "weak"]) and bool(out.loc["rain_days", "strong"])
    assert not bool(out.loc["rain_total", "weak"])
    assert bool(out.loc["temp_gdd", "weak"])
    assert out.loc["temp_gdd", "reference"] == "temp_mean"
    assert "rain_mean" not in out.index and "temp_mean" not in out.index


def test_reference_comparison_split_verdict_is_not_majority():
    rows = [
        make_row(metric="rain_mean", beta1=0.0, se1=0.1, g=20, outcome="primary_crop_yield"),
        make_row(metric="rain_mean", beta1=0.0, se1=0.1, g=20, outcome="total_farm_value"),
        make_row(metric="rain_days", beta1=5.0, se1=0.1, g=20, outcome="primary_crop_yield"),
        make_row(metric="rain_days", beta1=0.0, se1=0.1, g=20, outcome="total_farm_value"),
    ]
    out = reference_comparison(rows).set_index("metric")
    assert out.loc["rain_days", "n_weak"] == 1  # 1 of 2 cells: no majority
    assert not bool(out.loc["rain_days", "weak"])


def test_reference_comparison_missing_reference():
    with pytest.raises(MissingReference):
        reference_comparison([make_row(metric="rain_days")])
    rows = [
        make_row(metric="rain_mean", outcome="primary_crop_yield"),
        make_row(metric="rain_days", outcome="total_farm_value"),
    ]
    with pytest.raises(MissingReference):
        reference_comparison(rows)


def test_reference_comparison_ignores_errors_and_combos():
    rows = [
        make_row(metric="rain_mean", beta1=0.0, se1=0.1, g=20),
        make_row(metric="rain_days", beta1=5.0, se1=0.1, g=20),
        make_row(metric="rain_days", beta1=0.0, status="RankDeficient"),
    ]
    combo = make_row(metric="rain_days", beta1=9.0, se1=0.1, g=20)
    combo.key = RunKey("malawi", ("rf1", "tp1"), 3, ("rain_days", "temp_mean"),
                       "primary_crop_yield", "lin")
    out = reference_comparison(rows + [combo]).set_index("metric")
    assert out.loc["rain_days", "n_cells"] == 1


def test_spec_curve_sorted_with_stable_ties():
    rows = [
        make_row(beta1=0.3, metric="rain_mean", spec="lin"),
        make_row(beta1=-0.1, metric="rain_mean", spec="lin_fe"),
        make_row(beta1=0.3, metric="rain_total", spec="lin"),
        make_row(beta1=0.0, metric="rain_days", spec="lin"),
        make_row(beta1=9.9, status="NoVariation"),
    ]
    out = spec_curve_export(rows)
    assert list(out["beta1"]) == [-0.1, 0.0, 0.3, 0.3]
    # tie keeps battery (input) order: rain_mean row came first
    tied = out[out["beta1"] == 0.3]
    assert list(tied["metrics"]) == ["rain_mean", "rain_total"]
    assert list(out["rank"]) == [1, 2, 3, 4]
    assert set(out.columns) >= {"country", "products", "scheme", "metrics",
                                "outcome", "spec", "beta1", "lower", "upper",
                                "significant"}


def test_spec_curve_filter_and_significance():
    rows = [
        make_row(beta1=1.0, se1=0.01, p_joint=0.001, country="malawi", g=30),
        make_row(beta1=2.0, se1=0.01, p_joint=0.50, country="niger", g=30),
    ]
    out = spec_curve_export(rows, filters={"country": "niger"})
    assert len(out) == 1 and list(out["significant"]) == [False]
    both = spec_curve_export(rows, filters={"country": ["malawi", "niger"]})
    assert len(both) == 2 and list(both["significant"]) == [True, False]
    with pytest.raises(EmptyGroup):
        spec_curve_export(rows, filters={"country": "ethiopia"})


def test_spec_curve_ci_brackets_beta():
    rows = [make_row(beta1=0.5, se1=0.2, g=10)]
    out = spec_curve_export(rows)
    assert out.iloc[0]["lower"] < 0.5 < out.iloc[0]["upper"]


def test_r2_summary_known_value():
    rows = [make_row(adj_r2=v) for v in (0.1, 0.2, 0.3)]
    out = r2_summary(rows, group_by=())
    rec = out.iloc[0]
    half = 4.302652729911275 * 0.1 / math.sqrt(3)
    assert rec["mean_adj_r2"] == pytest.approx(0.2, abs=1e-12)
    assert rec["lower"] == pytest.approx(0.2 - half, abs=1e-6)
    assert rec["upper"] == pytest.approx(0.2 + half, abs=1e-6)
    assert rec["n"] == 3


def test_r2_summary_groups_and_empty():
    rows = [make_row(adj_r2=0.1, scheme=1), make_row(adj_r2=0.3, scheme=1),
            make_row(adj_r2=0.5, scheme=2), make_row(adj_r2=0.7, scheme=2)]
    out = r2_summary(rows, group_by=("scheme",)).set_index("scheme")
    assert out.loc["1", "mean_adj_r2"] == pytest.approx(0.2)
    assert out.loc["2", "mean_adj_r2"] == pytest.approx(0.6)
    with pytest.raises(EmptyGroup):
        r2_summary([make_row(adj_r2=0.1)], group_by=())
    with pytest.raises(EmptyGroup):
        r2_summary([make_row(adj_r2=0.1), make_row(status="NoVariation")], group_by=())
