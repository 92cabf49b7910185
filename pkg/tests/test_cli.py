"""Config parsing, pipeline stages, and CLI contract tests."""

import json
import math
import os
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from agweather.battery import enumerate_runs, read_results_csv
from agweather.cli import main as cli_main
from agweather.config import parse_config
from agweather.errors import ConfigError
from agweather.geo_extract import GeoPoint, extract_simple
from agweather.grid_store import load_raster_stack
from agweather.pipeline import battery_config, file_digest, weather_path
from agweather.weather_metrics import (
    DEFAULT_SEASON_WINDOWS,
    RAIN_METRICS,
    season_slice,
)

CONFIG_TEMPLATE = """
[run]
name = tiny
seed = 42
out_dir = {out_dir}

[countries]
countries = ethiopia

[products]
rain = rf1
temp = tp1

[schemes]
schemes = 1, 3, 9

[metrics]
rain = rain_mean, rain_total, rain_z_total
temp = temp_mean, temp_gdd, temp_max_avg

[specs]
models = lin, lin_fe_ctrl, quad

[battery]
combinations = total_gdd
threads = 2

[outputs]

[synth_weather]
start_year = 2008
end_year = 2010

[synth_survey]
n_admins = 2
eas_per_admin = 2
households_per_ea = 4
years = 2009, 2010
mover_share = 0
"""


def write_config(path, out_dir, mutate=None):
    text = CONFIG_TEMPLATE.format(out_dir=out_dir)
    if mutate:
        text = mutate(text)
    path.write_text(text)
    return str(path)


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = root / "out"
    ini = write_config(root / "run.ini", out)
    assert cli_main(["all", "--config", ini, "--quiet"]) == 0
    return SimpleNamespace(ini=ini, out=str(out), cfg=parse_config(ini))


# --- config parsing ---


def test_parse_config_fields(tmp_path):
    ini = write_config(tmp_path / "c.ini", tmp_path / "out")
    cfg = parse_config(ini)
    assert cfg.countries == ("ethiopia",)
    assert cfg.rain_products == ("rf1",) and cfg.temp_products == ("tp1",)
    assert cfg.schemes == (1, 3, 9)
    assert cfg.rain_metrics == ("rain_mean", "rain_total", "rain_z_total")
    assert cfg.models == ("lin", "lin_fe_ctrl", "quad")
    assert [b.name for b in cfg.combination_blocks] == ["total_gdd"]
    assert cfg.survey_years == (2009, 2010)
    assert cfg.threads == 2 and cfg.p_rule == "joint"
    assert len(cfg.config_hash) == 64
    assert cfg.season_for("ethiopia") == DEFAULT_SEASON_WINDOWS["ethiopia"]


def test_parse_config_all_keyword(tmp_path):
    ini = write_config(tmp_path / "c.ini", tmp_path / "out",
                       lambda t: t.replace("rain = rain_mean, rain_total, rain_z_total",
                                           "rain = all"))
    cfg = parse_config(ini)
    assert cfg.rain_metrics == RAIN_METRICS


def test_missing_section_names_it(tmp_path):
    ini = write_config(tmp_path / "c.ini", tmp_path / "out",
                       lambda t: t.replace("[metrics]", "[metricz]"))
    with pytest.raises(ConfigError, match=r"\[metrics\]"):
        parse_config(ini)


def test_overrides_and_aliases(tmp_path):
    ini = write_config(tmp_path / "c.ini", tmp_path / "out")
    base = parse_config(ini)
    over = parse_config(ini, ["schemes.schemes=3", "run.seed=7"])
    assert over.schemes == (3,) and over.seed == 7
    assert over.config_hash != base.config_hash
    again = parse_config(ini, ["run.seed=7", "schemes.schemes=3"])
    assert again.config_hash == over.config_hash  # order-insensitive hash
    aliased = parse_config(ini, ["battery.schemes=4"])
    assert aliased.schemes == (4,)
    with pytest.raises(ConfigError, match="section prefix"):
        parse_config(ini, ["seed=7"])
    with pytest.raises(ConfigError, match="form"):
        parse_config(ini, ["run.seed"])


@pytest.mark.parametrize("mutate, needle", [
    (lambda t: t.replace("countries = ethiopia", "countries = atlantis"), "countries"),
    (lambda t: t.replace("schemes = 1, 3, 9", "schemes = 0, 3"), "schemes"),
    (lambda t: t.replace("models = lin, lin_fe_ctrl, quad", "models = cubic"), "models"),
    (lambda t: t.replace("combinations = total_gdd", "combinations = moon_block"),
     "combinations"),
    (lambda t: t.replace("threads = 2", "threads = 0"), "threads"),
    (lambda t: t.replace("years = 2009, 2010", "years = 1999"), "years"),
    (lambda t: t.replace("rain = rain_mean, rain_total, rain_z_total",
                         "rain = rain_everything"), "rain"),
    (lambda t: t + "\n[seasons]\nethiopia = 02-30:09-30\n", "season"),
    (lambda t: t + "\n[seasons]\nnarnia = 06-01:09-30\n", "narnia"),
    (lambda t: t + "\n[spec_curve]\nflavor = spicy\n", "flavor"),
    (lambda t: t.replace("[outputs]", "[outputs]\nplots = x.csv"), "plots"),
    (lambda t: t.replace("combinations = total_gdd\nthreads = 2",
                         "combinations = total_gdd\nthreads = 2\np_rule = maybe"),
     "p_rule"),
])
def test_bad_values_rejected(tmp_path, mutate, needle):
    ini = write_config(tmp_path / "c.ini", tmp_path / "out", mutate)
    with pytest.raises(ConfigError, match=needle):
        parse_config(ini)


def test_season_override_parses(tmp_path):
    ini = write_config(tmp_path / "c.ini", tmp_path / "out",
                       lambda t: t + "\n[seasons]\nethiopia = 05-15:10-15\n")
    cfg = parse_config(ini)
    win = cfg.season_for("ethiopia")
    assert (win.start_month, win.start_day, win.end_month, win.end_day) == (5, 15, 10, 15)


# --- pipeline artifacts ---


def test_all_outputs_present(run):
    for key in ("survey", "truth", "features", "metrics", "drops", "results",
                "shares", "r2", "spec_curve", "diff_tests"):
        assert os.path.exists(run.cfg.out_path(key)), key
    assert os.path.exists(weather_path(run.cfg, "ethiopia", "rf1"))
    assert os.path.exists(weather_path(run.cfg, "ethiopia", "tp1", tmax=True))
    hh_csv = os.path.join(run.out, "geo", "ethiopia_households.csv")
    assert os.path.exists(hh_csv)
    assert os.path.exists(os.path.join(run.out, "manifest_all.json"))


def test_features_row_count(run):
    feats = pd.read_csv(run.cfg.out_path("features"))
    n_hh = len(pd.read_csv(os.path.join(run.out, "geo", "ethiopia_households.csv")))
    assert n_hh == 2 * 2 * 4
    assert len(feats) == n_hh * len(run.cfg.schemes)
    by_method = feats.groupby("scheme")["method"].agg(set)
    assert by_method[1] == {"simple"} and by_method[9] == {"zonal"}
    zonal = feats[feats.scheme == 9]
    assert (zonal["radius_km"] == run.cfg.buffer_radius_km).all()


def test_metrics_value_oracle(run):
    """metrics.csv values re-derive from the rasters and geography alone."""
    hh = pd.read_csv(os.path.join(run.out, "geo", "ethiopia_households.csv")).iloc[0]
    stack = load_raster_stack(weather_path(run.cfg, "ethiopia", "rf1"))
    series = extract_simple(stack, GeoPoint(hh.lon, hh.lat),
                            stack.start_date, stack.end_date)
    season = season_slice(series, DEFAULT_SEASON_WINDOWS["ethiopia"], 2009)
    want_mean = float(np.mean(season.values))
    want_total = float(np.sum(season.values))

    table = pd.read_csv(run.cfg.out_path("metrics"))
    sel = table[(table.hh_id == hh.hh_id) & (table.scheme == 1)
                & (table.product_id == "rf1") & (table.year == 2009)]
    got = dict(zip(sel.metric_id, sel.value))
    assert got["rain_mean"] == pytest.approx(want_mean, rel=1e-12)
    assert got["rain_total"] == pytest.approx(want_total, rel=1e-12)
    assert set(sel.metric_id) == set(run.cfg.rain_metrics)
    assert not sel.missing_flag.any()


def test_metrics_proxy_and_zonal_failures(run):
    table = pd.read_csv(run.cfg.out_path("metrics"))
    tmax_rows = table[table.metric_id == "temp_max_avg"]
    # tp1 ships a real daily-max series, so no proxy flag
    assert not tmax_rows.proxy_flag.any()
    # 10 km circles on the half-degree temperature grid find no cell centers
    zonal_temp = table[(table.scheme == 9) & (table.product_id == "tp1")]
    assert len(zonal_temp) > 0 and zonal_temp.missing_flag.all()
    zonal_rain = table[(table.scheme == 9) & (table.product_id == "rf1")]
    assert not zonal_rain.missing_flag.any()


def test_battery_rows_match_enumeration(run):
    rows = read_results_csv(run.cfg.out_path("results"))
    keys = enumerate_runs(battery_config(run.cfg))
    assert [r.key for r in rows] == keys
    ok = [r for r in rows if r.ok]
    assert ok, "battery produced no successful fits"
    failed = {(r.key.products, r.key.scheme) for r in rows if not r.ok}
    assert failed == {(("tp1",), 9), (("rf1", "tp1"), 9)}


def test_battery_rerun_and_threads_identical(run, monkeypatch):
    results = run.cfg.out_path("results")
    before = open(results, "rb").read()
    assert cli_main(["battery", "--config", run.ini, "--quiet"]) == 0
    assert open(results, "rb").read() == before
    monkeypatch.setenv("AGW_THREADS", "5")
    assert cli_main(["battery", "--config", run.ini, "--quiet"]) == 0
    assert open(results, "rb").read() == before


def test_manifest_contents(run):
    with open(os.path.join(run.out, "manifest_all.json")) as fh:
        m_all = json.load(fh)
    with open(os.path.join(run.out, "manifest_battery.json")) as fh:
        m_bat = json.load(fh)
    assert m_all["config_hash"] == m_bat["config_hash"] == run.cfg.config_hash
    assert m_all["seed"] == 42
    assert set(m_all["timings_s"]) == {
        "synth-weather", "synth-survey", "extract", "metrics", "merge",
        "battery", "summarize", "spec-curve", "diff-test"}
    results = run.cfg.out_path("results")
    assert m_bat["outputs"][results] == file_digest(results)


def test_truth_json(run):
    with open(run.cfg.out_path("truth")) as fh:
        truth = json.load(fh)
    assert set(truth) == {"ethiopia"}
    assert truth["ethiopia"]["beta"] == run.cfg.beta
    assert truth["ethiopia"]["planted_metric"] == "rain_total"
    assert math.isfinite(truth["ethiopia"]["intercept_yield"])


def test_merged_files_and_drops(run):
    merged_dir = os.path.join(run.out, "merged")
    files = sorted(os.listdir(merged_dir))
    assert len(files) == 2 * len(run.cfg.schemes)  # 2 products x 3 schemes
    sample = pd.read_csv(os.path.join(merged_dir, "ethiopia_rf1_s1.csv"))
    for metric in run.cfg.rain_metrics:
        assert metric in sample.columns
    drops = pd.read_csv(run.cfg.out_path("drops"))
    assert list(drops.columns) == ["country", "product_id", "scheme",
                                   "hh_id", "year", "reason"]
    # the empty-zone scheme drops every temperature row
    tp_drops = drops[(drops.product_id == "tp1") & (drops.scheme == 9)]
    assert len(tp_drops) == 16 * 2


def test_summaries_shape(run):
    shares = pd.read_csv(run.cfg.out_path("shares"))
    assert set(shares.level.round(2)) == {0.90, 0.95, 0.99}
    assert ((shares.lower <= shares.share) & (shares.share <= shares.upper)).all()
    assert set(shares.scheme) == {1, 3, 9}
    r2 = pd.read_csv(run.cfg.out_path("r2"))
    assert {"scheme", "spec", "mean_adj_r2", "lower", "upper", "n"} <= set(r2.columns)
    curve = pd.read_csv(run.cfg.out_path("spec_curve"))
    assert list(curve.beta1) == sorted(curve.beta1)
    diffs = pd.read_csv(run.cfg.out_path("diff_tests"))
    assert {"metric", "reference", "n_cells", "n_weak", "n_strong"} <= set(diffs.columns)
    assert "rain_total" in set(diffs.metric)


def test_exit_codes(tmp_path, capsys):
    assert cli_main(["battery", "--config", str(tmp_path / "none.ini")]) == 1
    ini = write_config(tmp_path / "broken.ini", tmp_path / "out",
                       lambda t: t.replace("[metrics]", "[metricz]"))
    assert cli_main(["battery", "--config", ini]) == 1
    assert "[metrics]" in capsys.readouterr().err
    ok_ini = write_config(tmp_path / "ok.ini", tmp_path / "empty_out")
    assert cli_main(["summarize", "--config", ok_ini]) == 2


def test_seed_flag_changes_outputs(run, tmp_path):
    out2 = tmp_path / "out2"
    assert cli_main(["synth-weather", "--config", run.ini, "--quiet",
                     "--seed", "43", "--out", str(out2)]) == 0
    a = open(weather_path(run.cfg, "ethiopia", "rf1"), "rb").read()
    b = open(os.path.join(str(out2), "weather", "ethiopia_rf1.agwx"), "rb").read()
    assert a != b
