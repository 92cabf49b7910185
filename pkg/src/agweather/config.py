"""INI run configuration: one file drives every pipeline stage.

Required sections: [countries] [products] [schemes] [metrics] [specs]
[outputs].  Optional sections tune the synthetic generators, extraction,
and summaries.  Command-line overrides are dotted keys (section.key=value)
applied before validation, so an override is checked like any file value.
"""

from __future__ import annotations

import hashlib
import os
from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass, field

from .battery import PAPER_COMBINATION_BLOCKS, CombinationBlock, P_RULES
from .econometrics import MODEL_NAMES
from .errors import ConfigError
from .weather_metrics import (
    DEFAULT_SEASON_WINDOWS,
    RAIN_METRICS,
    SeasonWindow,
    TEMP_METRICS,
)

REQUIRED_SECTIONS = ("countries", "products", "schemes", "metrics", "specs", "outputs")

COUNTRIES = ("ethiopia", "malawi", "niger", "nigeria", "tanzania", "uganda")
RAIN_PRODUCT_IDS = ("rf1", "rf2", "rf3", "rf4", "rf5", "rf6")
TEMP_PRODUCT_IDS = ("tp1", "tp2", "tp3")

#: default artifact names, resolved under out_dir
DEFAULT_OUTPUTS = {
    "weather_dir": "weather",
    "geo_dir": "geo",
    "survey": "survey.csv",
    "truth": "dgp_truth.json",
    "features": "features.csv",
    "metrics": "metrics.csv",
    "merged_dir": "merged",
    "drops": "drops.csv",
    "results": "results.csv",
    "shares": "shares.csv",
    "r2": "r2.csv",
    "spec_curve": "spec_curve.csv",
    "diff_tests": "diff_tests.csv",
}

#: ergonomic aliases for dotted override keys
OVERRIDE_ALIASES = {
    "battery.schemes": ("schemes", "schemes"),
    "battery.countries": ("countries", "countries"),
}

_BLOCKS_BY_NAME = {b.name: b for b in PAPER_COMBINATION_BLOCKS}


@dataclass(frozen=True)
class RunConfig:
    """Fully parsed and validated run configuration."""

    name: str
    seed: int
    out_dir: str
    countries: tuple[str, ...]
    rain_products: tuple[str, ...]
    temp_products: tuple[str, ...]
    schemes: tuple[int, ...]
    rain_metrics: tuple[str, ...]
    temp_metrics: tuple[str, ...]
    models: tuple[str, ...]
    combination_blocks: tuple[CombinationBlock, ...]
    threads: int
    p_rule: str
    outputs: dict[str, str]
    # synthetic weather
    weather_start_year: int
    weather_end_year: int
    margin_deg: float
    correlation_km: float
    # synthetic survey
    n_admins: int
    eas_per_admin: int
    households_per_ea: int
    survey_years: tuple[int, ...]
    beta: float
    beta2: float
    planted_metric: str
    urban_share: float
    mover_share: float
    hh_scatter_km: float
    # extraction
    buffer_radius_km: float
    offset_seed: int
    # summaries
    share_group_by: tuple[str, ...]
    share_levels: tuple[float, ...]
    r2_group_by: tuple[str, ...]
    curve_filters: dict[str, str] = field(default_factory=dict)
    seasons: dict[str, SeasonWindow] = field(default_factory=dict)
    config_hash: str = ""

    def out_path(self, key: str) -> str:
        return os.path.join(self.out_dir, self.outputs[key])

    def season_for(self, country: str) -> SeasonWindow:
        if country in self.seasons:
            return self.seasons[country]
        return DEFAULT_SEASON_WINDOWS[country]


def _split_list(raw: str) -> list[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


def apply_overrides(parser: ConfigParser, overrides: list[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        dotted = dotted.strip()
        if dotted in OVERRIDE_ALIASES:
            section, key = OVERRIDE_ALIASES[dotted]
        elif "." in dotted:
            section, key = dotted.split(".", 1)
        else:
            raise ConfigError(f"override key {dotted!r} needs a section prefix")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key.strip(), value.strip())


def _canonical_text(parser: ConfigParser) -> str:
    chunks = []
    for section in sorted(parser.sections()):
        chunks.append(f"[{section}]")
        for key in sorted(parser.options(section)):
            chunks.append(f"{key}={parser.get(section, key)}")
    return "\n".join(chunks) + "\n"


def _get(parser, section, key, default=None):
    if parser.has_option(section, key):
        return parser.get(section, key)
    return default


def _require(parser, section, key):
    value = _get(parser, section, key)
    if value is None or not value.strip():
        raise ConfigError(f"missing key {key!r} in section [{section}]")
    return value


def _int(raw, where):
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected an integer, got {raw!r}") from None


def _float(raw, where):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {raw!r}") from None


def _named_subset(raw, universe, where, allow_all=True):
    if allow_all and raw.strip().lower() == "all":
        return tuple(universe)
    chosen = tuple(_split_list(raw))
    bad = [c for c in chosen if c not in universe]
    if bad:
        raise ConfigError(f"{where}: unknown entries {bad}; valid: {list(universe)}")
    return chosen


def _parse_window(raw: str, country: str, where: str) -> SeasonWindow:
    try:
        start, end = raw.split(":")
        sm, sd = (int(p) for p in start.strip().split("-"))
        em, ed = (int(p) for p in end.strip().split("-"))
        return SeasonWindow(country, sm, sd, em, ed)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: bad season window {raw!r} "
                          f"(want MM-DD:MM-DD): {exc}") from None


def parse_config(path: str, overrides: list[str] | None = None) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except ConfigParserError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    apply_overrides(parser, overrides or [])

    missing = [s for s in REQUIRED_SECTIONS if not parser.has_section(s)]
    if missing:
        listed = ", ".join(f"[{s}]" for s in missing)
        raise ConfigError(f"{path}: missing required section(s) {listed}")

    countries = _named_subset(
        _require(parser, "countries", "countries"), COUNTRIES, "[countries] countries"
    )
    rain_products = _named_subset(
        _get(parser, "products", "rain", ""), RAIN_PRODUCT_IDS, "[products] rain"
    )
    temp_products = _named_subset(
        _get(parser, "products", "temp", ""), TEMP_PRODUCT_IDS, "[products] temp"
    )
    if not rain_products and not temp_products:
        raise ConfigError("[products]: need at least one of rain/temp")

    raw_schemes = _require(parser, "schemes", "schemes")
    if raw_schemes.strip().lower() == "all":
        schemes = tuple(range(1, 11))
    else:
        schemes = tuple(_int(tok, "[schemes] schemes") for tok in _split_list(raw_schemes))
        bad = [s for s in schemes if not 1 <= s <= 10]
        if bad:
            raise ConfigError(f"[schemes] schemes: out of range {bad} (valid 1..10)")

    rain_metrics = _named_subset(
        _get(parser, "metrics", "rain", ""), RAIN_METRICS, "[metrics] rain"
    )
    temp_metrics = _named_subset(
        _get(parser, "metrics", "temp", ""), TEMP_METRICS, "[metrics] temp"
    )

    models = _named_subset(
        _require(parser, "specs", "models"), MODEL_NAMES, "[specs] models"
    )

    raw_blocks = _get(parser, "battery", "combinations", "none")
    if raw_blocks.strip().lower() == "all":
        blocks = PAPER_COMBINATION_BLOCKS
    elif raw_blocks.strip().lower() == "none":
        blocks = ()
    else:
        names = _split_list(raw_blocks)
        bad = [n for n in names if n not in _BLOCKS_BY_NAME]
        if bad:
            raise ConfigError(f"[battery] combinations: unknown blocks {bad}; "
                              f"valid: {sorted(_BLOCKS_BY_NAME)}")
        blocks = tuple(_BLOCKS_BY_NAME[n] for n in names)
    if not (rain_metrics or temp_metrics or blocks):
        raise ConfigError("[metrics]: no metrics selected and no combination blocks")
    if blocks and not (rain_products and temp_products):
        raise ConfigError("[battery] combinations need both rain and temp products")

    p_rule = _get(parser, "battery", "p_rule", "joint").strip()
    if p_rule not in P_RULES:
        raise ConfigError(f"[battery] p_rule: {p_rule!r} not in {list(P_RULES)}")

    outputs = dict(DEFAULT_OUTPUTS)
    if parser.has_section("outputs"):
        for key in parser.options("outputs"):
            if key not in DEFAULT_OUTPUTS:
                raise ConfigError(f"[outputs]: unknown artifact key {key!r}; "
                                  f"valid: {sorted(DEFAULT_OUTPUTS)}")
            outputs[key] = parser.get("outputs", key)

    years_raw = _get(parser, "synth_survey", "years", "2010, 2012, 2014")
    survey_years = tuple(_int(t, "[synth_survey] years") for t in _split_list(years_raw))
    if not survey_years:
        raise ConfigError("[synth_survey] years: need at least one year")

    w_start = _int(_get(parser, "synth_weather", "start_year", "2004"),
                   "[synth_weather] start_year")
    w_end = _int(_get(parser, "synth_weather", "end_year", str(max(survey_years))),
                 "[synth_weather] end_year")
    if w_end < w_start:
        raise ConfigError("[synth_weather]: end_year before start_year")
    if max(survey_years) > w_end or min(survey_years) < w_start:
        raise ConfigError("[synth_survey] years must fall inside the weather record "
                          f"({w_start}..{w_end})")

    planted = _get(parser, "synth_survey", "planted_metric", "rain_total").strip()
    if planted not in RAIN_METRICS + TEMP_METRICS:
        raise ConfigError(f"[synth_survey] planted_metric: unknown metric {planted!r}")

    seasons = {}
    if parser.has_section("seasons"):
        for key in parser.options("seasons"):
            if key not in COUNTRIES:
                raise ConfigError(f"[seasons]: unknown country {key!r}")
            seasons[key] = _parse_window(parser.get("seasons", key), key,
                                         f"[seasons] {key}")

    curve_filters = {}
    if parser.has_section("spec_curve"):
        for key in parser.options("spec_curve"):
            if key not in ("country", "products", "scheme", "metrics", "outcome", "spec"):
                raise ConfigError(f"[spec_curve]: unknown filter key {key!r}")
            value = parser.get("spec_curve", key).strip()
            if value:
                curve_filters[key] = value

    group_raw = _get(parser, "summarize", "group_by", "scheme")
    share_group_by = tuple(_split_list(group_raw))
    for g in share_group_by:
        if g not in ("country", "products", "scheme", "metrics", "outcome", "spec"):
            raise ConfigError(f"[summarize] group_by: unknown field {g!r}")
    levels_raw = _get(parser, "summarize", "levels", "0.90, 0.95, 0.99")
    share_levels = tuple(_float(t, "[summarize] levels") for t in _split_list(levels_raw))
    for lv in share_levels:
        if not 0.5 < lv < 1.0:
            raise ConfigError(f"[summarize] levels: {lv} outside (0.5, 1)")
    r2_raw = _get(parser, "summarize", "r2_group_by", "scheme, spec")
    r2_group_by = tuple(_split_list(r2_raw))
    for g in r2_group_by:
        if g not in ("country", "products", "scheme", "metrics", "outcome", "spec"):
            raise ConfigError(f"[summarize] r2_group_by: unknown field {g!r}")

    seed = _int(_get(parser, "run", "seed", "0"), "[run] seed")
    threads = _int(_get(parser, "battery", "threads", "1"), "[battery] threads")
    if threads < 1:
        raise ConfigError("[battery] threads must be >= 1")

    cfg = RunConfig(
        name=_get(parser, "run", "name", os.path.splitext(os.path.basename(path))[0]),
        seed=seed,
        out_dir=_get(parser, "run", "out_dir", "out"),
        countries=countries,
        rain_products=rain_products,
        temp_products=temp_products,
        schemes=schemes,
        rain_metrics=rain_metrics,
        temp_metrics=temp_metrics,
        models=models,
        combination_blocks=blocks,
        threads=threads,
        p_rule=p_rule,
        outputs=outputs,
        weather_start_year=w_start,
        weather_end_year=w_end,
        margin_deg=_float(_get(parser, "synth_weather", "margin_deg", "0.4"),
                          "[synth_weather] margin_deg"),
        correlation_km=_float(_get(parser, "synth_weather", "correlation_km", "30"),
                              "[synth_weather] correlation_km"),
        n_admins=_int(_get(parser, "synth_survey", "n_admins", "4"),
                      "[synth_survey] n_admins"),
        eas_per_admin=_int(_get(parser, "synth_survey", "eas_per_admin", "3"),
                           "[synth_survey] eas_per_admin"),
        households_per_ea=_int(_get(parser, "synth_survey", "households_per_ea", "5"),
                               "[synth_survey] households_per_ea"),
        survey_years=survey_years,
        beta=_float(_get(parser, "synth_survey", "beta", "0.15"),
                    "[synth_survey] beta"),
        beta2=_float(_get(parser, "synth_survey", "beta2", "0"),
                     "[synth_survey] beta2"),
        planted_metric=planted,
        urban_share=_float(_get(parser, "synth_survey", "urban_share", "0.2"),
                           "[synth_survey] urban_share"),
        mover_share=_float(_get(parser, "synth_survey", "mover_share", "0.02"),
                           "[synth_survey] mover_share"),
        hh_scatter_km=_float(_get(parser, "synth_survey", "hh_scatter_km", "1.5"),
                             "[synth_survey] hh_scatter_km"),
        buffer_radius_km=_float(_get(parser, "extraction", "buffer_radius_km", "10"),
                                "[extraction] buffer_radius_km"),
        offset_seed=_int(_get(parser, "extraction", "offset_seed", "17"),
                         "[extraction] offset_seed"),
        share_group_by=share_group_by,
        share_levels=share_levels,
        r2_group_by=r2_group_by,
        curve_filters=curve_filters,
        seasons=seasons,
        config_hash=hashlib.sha256(_canonical_text(parser).encode()).hexdigest(),
    )
    if cfg.buffer_radius_km <= 0:
        raise ConfigError("[extraction] buffer_radius_km must be > 0")
    return cfg
