"""Panel OLS with absorbed household effects and clustered errors.

Six model forms: {linear, quadratic} x {pooled, household+year FE,
FE with input controls}.  Household effects are absorbed by within-
demeaning (singleton households drop), year effects enter as dummies with
the first year as base, and standard errors cluster at the household level
with the CR1 small-sample factor.  R-squared is computed against the
original (untransformed-by-FE) response so nested forms are comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.linalg
from scipy import stats as sps

from .errors import (
    AllMissingMetric,
    DegenerateDof,
    MissingColumn,
    NoVariation,
    RankDeficient,
    TooFewClusters,
)
from .survey_model import CONTROL_COLUMNS, ihs, transform_control, transform_metric

#: the six model forms in battery order: (shape, fixed effects, controls)
MODEL_FORMS = {
    "lin": ("linear", False, False),
    "lin_fe": ("linear", True, False),
    "lin_fe_ctrl": ("linear", True, True),
    "quad": ("quadratic", False, False),
    "quad_fe": ("quadratic", True, False),
    "quad_fe_ctrl": ("quadratic", True, True),
}
MODEL_NAMES = tuple(MODEL_FORMS)

LINEAR_MODELS = ("lin", "lin_fe", "lin_fe_ctrl")
QUADRATIC_MODELS = ("quad", "quad_fe", "quad_fe_ctrl")


@dataclass(frozen=True)
class RegressionSpec:
    """One estimable model: form pattern plus weather terms and outcome."""

    name: str
    form: str  # linear | quadratic
    fixed_effects: bool
    controls: bool
    metrics: tuple[str, ...]
    outcome: str

    def __post_init__(self):
        if self.form not in ("linear", "quadratic"):
            raise ValueError(f"unknown form {self.form!r}")
        if not self.metrics:
            raise ValueError("spec needs at least one weather metric")
        if self.controls and not self.fixed_effects:
            raise ValueError("controls without fixed effects is not a canonical form")


def make_spec(name: str, metrics, outcome: str) -> RegressionSpec:
    if name not in MODEL_FORMS:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    form, fe, ctrl = MODEL_FORMS[name]
    if isinstance(metrics, str):
        metrics = (metrics,)
    return RegressionSpec(
        name=name, form=form, fixed_effects=fe, controls=ctrl,
        metrics=tuple(metrics), outcome=outcome,
    )


@dataclass
class DesignMatrices:
    y: np.ndarray
    X: np.ndarray
    names: list[str]
    cluster_ids: np.ndarray
    weather_names: list[str]
    n_dropped_nan: int = 0


def build_design(frame: pd.DataFrame, spec: RegressionSpec) -> DesignMatrices:
    """Response, regressor matrix, and household cluster ids for one spec.

    Outcome and policy-listed inputs/metrics are IHS-transformed; the
    quadratic form squares each transformed weather term.  Year dummies
    (first year dropped) appear only in FE specs; a constant only when FE
    are absent.  Rows with any NaN in a used column are dropped.
    """
    needed = [spec.outcome, *spec.metrics, "hh_id", "year"]
    if spec.controls:
        needed.extend(CONTROL_COLUMNS)
    for col in needed:
        if col not in frame.columns:
            raise MissingColumn(f"column {col!r} not in panel")
    for m in spec.metrics:
        if frame[m].isna().all():
            raise AllMissingMetric(f"metric {m!r} has no observed values")

    y = ihs(frame[spec.outcome].to_numpy(np.float64))
    cols: list[np.ndarray] = []
    names: list[str] = []
    weather_names: list[str] = []
    if not spec.fixed_effects:
        cols.append(np.ones(len(frame)))
        names.append("const")
    for m in spec.metrics:
        w = transform_metric(m, frame[m].to_numpy(np.float64))
        cols.append(w)
        names.append(m)
        weather_names.append(m)
        if spec.form == "quadratic":
            cols.append(w * w)
            names.append(f"{m}^2")
            weather_names.append(f"{m}^2")
    if spec.controls:
        for c in CONTROL_COLUMNS:
            cols.append(transform_control(c, frame[c].to_numpy(np.float64)))
            names.append(c)
    if spec.fixed_effects:
        years = sorted(frame["year"].unique())
        for yr in years[1:]:
            cols.append((frame["year"] == yr).to_numpy(np.float64))
            names.append(f"year_{yr}")

    X = np.column_stack(cols)
    ok = np.isfinite(y) & np.isfinite(X).all(axis=1)
    n_dropped = int((~ok).sum())
    return DesignMatrices(
        y=y[ok],
        X=X[ok],
        names=names,
        cluster_ids=frame["hh_id"].to_numpy()[ok],
        weather_names=weather_names,
        n_dropped_nan=n_dropped,
    )


@dataclass
class WithinResult:
    y: np.ndarray
    X: np.ndarray
    keep: np.ndarray  # mask into the input rows
    n_households: int
    n_singletons: int  # households dropped for having one row


def within_transform(y: np.ndarray, X: np.ndarray, household_ids) -> WithinResult:
    """Demean within household; households with a single row drop."""
    ids = np.asarray(household_ids)
    codes, inverse = np.unique(ids, return_inverse=True)
    counts = np.bincount(inverse)
    keep = counts[inverse] > 1
    n_singletons = int((counts == 1).sum())
    if not keep.any():
        raise NoVariation("every household has a single observation")
    inv = inverse[keep]
    yk = y[keep]
    Xk = X[keep]
    # recode to dense group ids over kept rows
    kept_codes, inv = np.unique(inv, return_inverse=True)
    n_g = len(kept_codes)
    gsum_y = np.bincount(inv, weights=yk, minlength=n_g)
    gcount = np.bincount(inv, minlength=n_g).astype(np.float64)
    y_t = yk - (gsum_y / gcount)[inv]
    X_t = np.empty_like(Xk)
    for j in range(Xk.shape[1]):
        gsum = np.bincount(inv, weights=Xk[:, j], minlength=n_g)
        X_t[:, j] = Xk[:, j] - (gsum / gcount)[inv]
    return WithinResult(y=y_t, X=X_t, keep=keep, n_households=n_g,
                        n_singletons=n_singletons)


@dataclass
class OlsFit:
    beta: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray


def ols_fit(y: np.ndarray, X: np.ndarray, names: list[str] | None = None) -> OlsFit:
    """Least squares via QR; verifies the normal equations afterwards.

    Rank deficiency is an error naming the offending columns, never a
    silent drop.
    """
    n, k = X.shape
    if n < k:
        raise RankDeficient(f"{n} rows cannot identify {k} columns")
    q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, k) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0)
    rank = int((diag > tol).sum())
    if rank < k:
        bad = sorted(piv[rank:])
        labels = [names[i] if names else str(i) for i in bad]
        raise RankDeficient(f"collinear columns: {labels}")
    beta = scipy.linalg.solve_triangular(r[:rank], q.T[:rank] @ y)
    # undo the pivot
    out = np.empty(k)
    out[piv] = beta
    fitted = X @ out
    residuals = y - fitted
    # normal-equation check: X'(y - Xb) ~ 0 relative to ||X||
    gradient = np.abs(X.T @ residuals).max()
    scale = np.linalg.norm(X) * max(1.0, np.linalg.norm(y))
    if gradient > 1e-8 * max(scale, 1.0):
        raise FloatingPointError(
            f"least-squares gradient {gradient:.3e} exceeds tolerance"
        )
    return OlsFit(beta=out, residuals=residuals, fitted=fitted)


def cluster_robust_vcov(
    X: np.ndarray,
    residuals: np.ndarray,
    cluster_ids,
    n_absorbed: int = 0,
) -> np.ndarray:
    """CR1 sandwich: (X'X)^-1 meat (X'X)^-1 * G/(G-1) * (N-1)/(N-K).

    K is the column count of X plus whatever ``n_absorbed`` the caller
    charges.  Clustering at the absorbed-group level charges none: demeaned
    groups consume no cluster degrees of freedom, and charging them anyway
    overstates the errors badly in short panels.  With every cluster a
    singleton this equals the HC1 heteroskedasticity-robust estimator.
    """
    ids = np.asarray(cluster_ids)
    n, k = X.shape
    k_total = k + n_absorbed
    _, inverse = np.unique(ids, return_inverse=True)
    g = int(inverse.max()) + 1
    if g < 2:
        raise TooFewClusters(f"{g} cluster(s); need at least 2")
    if n - k_total <= 0:
        raise DegenerateDof(f"N={n} observations, K={k_total} parameters")
    xtx = X.T @ X
    bread = np.linalg.inv(xtx)
    # score sums per cluster
    xu = X * residuals[:, None]
    scores = np.zeros((g, k))
    np.add.at(scores, inverse, xu)
    meat = scores.T @ scores
    factor = (g / (g - 1.0)) * ((n - 1.0) / (n - k_total))
    vcov = factor * bread @ meat @ bread
    return 0.5 * (vcov + vcov.T)


@dataclass
class RegressionFit:
    spec: RegressionSpec
    names: list[str]
    beta: np.ndarray
    se: np.ndarray
    p: np.ndarray
    vcov: np.ndarray
    p_joint: float
    r2: float
    adj_r2: float
    n: int
    g: int
    k_total: int
    n_absorbed: int
    n_singletons: int
    weather_names: list[str]

    def term(self, name: str) -> int:
        return self.names.index(name)


def fit_statistics(
    beta: np.ndarray,
    vcov: np.ndarray,
    weather_idx: list[int],
    n: int,
    g: int,
    k_total: int,
    ssr: float,
    sst: float,
) -> tuple[np.ndarray, np.ndarray, float, float, float]:
    """(se, per-term p, joint weather p, R2, adjusted R2).

    t statistics use G-1 degrees of freedom; the joint test is a Wald F
    on the weather block with (q, G-1) dof.  Adjusted R2 charges every
    parameter, absorbed effects included.
    """
    dof = g - 1
    if dof < 1 or n - k_total < 1:
        raise DegenerateDof(f"G={g} clusters, N={n}, K={k_total}")
    se = np.sqrt(np.diag(vcov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    p = 2.0 * sps.t.sf(np.abs(t), dof)
    sub = np.ix_(weather_idx, weather_idx)
    bw = beta[weather_idx]
    vw = vcov[sub]
    q = len(weather_idx)
    try:
        stat = float(bw @ np.linalg.solve(vw, bw))
    except np.linalg.LinAlgError as exc:
        raise DegenerateDof(f"singular weather vcov block: {exc}") from exc
    p_joint = float(sps.f.sf(stat / q, q, dof))
    r2 = 1.0 - ssr / sst if sst > 0 else float("nan")
    adj = 1.0 - (1.0 - r2) * (n - 1.0) / (n - k_total)
    return se, p, p_joint, r2, adj


def fit_model(frame: pd.DataFrame, spec: RegressionSpec) -> RegressionFit:
    """Full pipeline for one spec: design, absorb, solve, clustered inference."""
    design = build_design(frame, spec)
    y, X = design.y, design.X
    clusters = design.cluster_ids
    n_absorbed = 0
    n_singletons = 0
    if spec.fixed_effects:
        within = within_transform(y, X, clusters)
        y_orig = y[within.keep]
        clusters = clusters[within.keep]
        y, X = within.y, within.X
        n_absorbed = within.n_households
        n_singletons = within.n_singletons
    else:
        y_orig = y
    fit = ols_fit(y, X, design.names)
    # clusters coincide with the absorbed households, so they are not
    # charged to the CR1 factor; adjusted R2 still counts them via k_total
    vcov = cluster_robust_vcov(X, fit.residuals, clusters)
    n = len(y)
    g = len(np.unique(clusters))
    k_total = X.shape[1] + n_absorbed
    # R2 against the original response: residuals are unchanged by absorption
    ssr = float(fit.residuals @ fit.residuals)
    sst = float(((y_orig - y_orig.mean()) ** 2).sum())
    weather_idx = [design.names.index(w) for w in design.weather_names]
    se, p, p_joint, r2, adj = fit_statistics(
        fit.beta, vcov, weather_idx, n, g, k_total, ssr, sst
    )
    return RegressionFit(
        spec=spec,
        names=design.names,
        beta=fit.beta,
        se=se,
        p=p,
        vcov=vcov,
        p_joint=p_joint,
        r2=r2,
        adj_r2=adj,
        n=n,
        g=g,
        k_total=k_total,
        n_absorbed=n_absorbed,
        n_singletons=n_singletons,
        weather_names=design.weather_names,
    )
