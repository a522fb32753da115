"""Weighted least squares with fixed-effect absorption and cluster inference.

Fixed effects are absorbed by alternating weighted demeaning (see
``kernels``); the resulting coefficients equal the dense dummy-variable
WLS solution, and the cluster-robust sandwich computed on the demeaned
regressors equals the corresponding block of the dummy-variable sandwich.
The small-sample factor is G/(G-1) * (N-1)/(N-K), with K counting
explicit regressors plus absorbed fixed-effect degrees of freedom, so the
estimator reduces exactly to HC1 when every observation is its own
cluster.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .errors import NumericalError, ValidationError
from .exposure import ROLE_STANDARDIZED, ExposureVector
from .rng import make_rng
from .soc import OccId
from .tables import OccOutcomeTable, ShareTable


class Frame:
    """Immutable column store feeding the regression routines."""

    def __init__(self, columns: Mapping[str, np.ndarray]):
        if not columns:
            raise ValidationError("empty data frame")
        self._columns = {k: np.asarray(v) for k, v in columns.items()}
        lengths = {v.shape[0] for v in self._columns.values()}
        if len(lengths) != 1:
            raise ValidationError("columns have unequal lengths")
        self.n = lengths.pop()

    def column(self, name: str) -> np.ndarray:
        if name not in self._columns:
            raise ValidationError(f"unknown column {name!r}")
        return self._columns[name]

    def has_column(self, name: str) -> bool:
        return name in self._columns

    def with_column(self, name: str, values: np.ndarray) -> "Frame":
        merged = dict(self._columns)
        merged[name] = np.asarray(values)
        return Frame(merged)

    def names(self) -> list[str]:
        return list(self._columns)


@dataclass(frozen=True)
class FixedEffectSpec:
    """Categorical dimensions to absorb, e.g. ("occ", "state", "year").

    A dimension may be an interaction written "a:b". ``tol`` bounds the
    largest subtracted group mean at convergence.
    """

    dimensions: tuple[str, ...] = ()
    tol: float = 1e-8
    max_sweeps: int = 10_000

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ValidationError("absorption tolerance must be positive")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be at least 1")


def parse_formula(formula: str) -> tuple[str, list[str]]:
    if "~" not in formula:
        raise ValidationError(f"formula {formula!r} needs the form 'y ~ x1 + x2'")
    lhs, rhs = formula.split("~", 1)
    outcome = lhs.strip()
    terms = [t.strip() for t in rhs.split("+") if t.strip()]
    if not outcome or not terms:
        raise ValidationError(f"formula {formula!r} needs an outcome and regressors")
    return outcome, terms


def _factorize(frame: Frame, dim: str) -> np.ndarray:
    parts = [frame.column(p.strip()) for p in dim.split(":")]
    if len(parts) == 1:
        _, codes = np.unique(parts[0], return_inverse=True)
        return codes.astype(np.int64)
    stacked = np.array([tuple(str(p[i]) for p in parts) for i in range(len(parts[0]))])
    _, codes = np.unique(stacked, return_inverse=True, axis=0)
    return codes.astype(np.int64)


@dataclass(frozen=True)
class RegressionFit:
    """A fitted WLS model with cluster-robust covariance."""

    terms: tuple[str, ...]
    coef: np.ndarray
    vcov: np.ndarray
    nobs: int
    n_clusters: int
    cluster_dim: str
    vcov_type: str
    k_params: int
    r2_within: float
    resid_var: float
    sweeps: int = 0
    outcome: str = ""

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.vcov))

    def index(self, term: str) -> int:
        try:
            return self.terms.index(term)
        except ValueError:
            raise ValidationError(f"term {term!r} not in fit ({self.terms})") from None

    def coefficient(self, term: str) -> float:
        return float(self.coef[self.index(term)])

    def se_for(self, term: str) -> float:
        return float(self.se[self.index(term)])

    def tstat(self, term: str) -> float:
        return self.coefficient(term) / self.se_for(term)

    def pvalue(self, term: str) -> float:
        df = max(self.n_clusters - 1, 1)
        return float(2.0 * stats.t.sf(abs(self.tstat(term)), df))

    def to_json(self, term: str | None = None) -> str:
        term = term or self.terms[0]
        payload = {
            "coef": self.coefficient(term),
            "se": self.se_for(term),
            "n": self.nobs,
            "clusters": self.n_clusters,
            "vcov_type": self.vcov_type,
            "term": term,
            "outcome": self.outcome,
            "all_terms": {
                t: {"coef": float(self.coef[i]), "se": float(self.se[i])}
                for i, t in enumerate(self.terms)
            },
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class FitSummary:
    """The slim fit record used by bound construction and reporting."""

    coef: float
    se: float
    n: int
    clusters: int
    vcov_type: str
    term: str = ""
    outcome: str = ""

    @staticmethod
    def from_json(text: str) -> "FitSummary":
        raw = json.loads(text)
        try:
            return FitSummary(
                coef=float(raw["coef"]),
                se=float(raw["se"]),
                n=int(raw["n"]),
                clusters=int(raw["clusters"]),
                vcov_type=str(raw["vcov_type"]),
                term=str(raw.get("term", "")),
                outcome=str(raw.get("outcome", "")),
            )
        except KeyError as exc:
            raise ValidationError(f"fit JSON missing field {exc}") from None


def summarize(fit: RegressionFit, term: str | None = None) -> FitSummary:
    term = term or fit.terms[0]
    return FitSummary(
        coef=fit.coefficient(term),
        se=fit.se_for(term),
        n=fit.nobs,
        clusters=fit.n_clusters,
        vcov_type=fit.vcov_type,
        term=term,
        outcome=fit.outcome,
    )


def _absorbed_dof(codes: np.ndarray) -> int:
    # Levels minus (d - 1) connecting restrictions; exact for connected
    # designs, the standard approximation otherwise.
    if codes.size == 0:
        return 0
    d = codes.shape[0]
    return int(sum(codes[i].max() + 1 for i in range(d)) - (d - 1))


@dataclass
class _Prepared:
    y: np.ndarray
    X: np.ndarray
    w: np.ndarray
    fe_codes: np.ndarray
    cluster_codes: np.ndarray
    n_clusters: int
    k_params: int
    sweeps: int
    terms: tuple[str, ...]
    outcome: str
    cluster_dim: str
    vcov_type: str


def _prepare(
    frame: Frame,
    formula: str,
    fe: FixedEffectSpec | None,
    weights: str | None,
    cluster: str | None,
) -> _Prepared:
    outcome, terms = parse_formula(formula)
    y = frame.column(outcome).astype(np.float64)
    X = np.column_stack([frame.column(t).astype(np.float64) for t in terms])
    n, k = X.shape

    if weights is None:
        w = np.ones(n)
    else:
        w = frame.column(weights).astype(np.float64)
        if np.any(w <= 0):
            raise ValidationError("weights must be positive")

    fe = fe or FixedEffectSpec()
    sweeps = 0
    if fe.dimensions:
        fe_codes = np.stack([_factorize(frame, d) for d in fe.dimensions])
        for d, dim in enumerate(fe.dimensions):
            if fe_codes[d].max() + 1 < 1:
                raise ValidationError(f"fixed-effect dimension {dim!r} has no levels")
        mat = np.column_stack([y, X])
        mat, sweeps = kernels.demean(mat, fe_codes, w, fe.tol, fe.max_sweeps)
        y, X = mat[:, 0].copy(), mat[:, 1:].copy()
    else:
        fe_codes = np.empty((0, n), dtype=np.int64)

    sv = np.linalg.svd(np.sqrt(w)[:, None] * X, compute_uv=False)
    if sv.size and sv[-1] <= sv[0] * 1e-10:
        raise ValidationError(
            f"regressors are collinear after absorption (min/max singular value "
            f"{sv[-1]:.3e}/{sv[0]:.3e})"
        )

    if cluster is None:
        cluster_codes = np.arange(n, dtype=np.int64)
        n_clusters = n
        vcov_type = "hc1"
        cluster_dim = "observation"
    else:
        cluster_codes = _factorize(frame, cluster)
        n_clusters = int(cluster_codes.max()) + 1
        vcov_type = "cluster"
        cluster_dim = cluster
    if n_clusters < 2:
        raise ValidationError("need at least two clusters for cluster-robust inference")

    k_params = k + _absorbed_dof(fe_codes)
    if n <= k_params:
        raise ValidationError(
            f"too few observations ({n}) for {k_params} parameters"
        )
    return _Prepared(
        y=y, X=X, w=w, fe_codes=fe_codes, cluster_codes=cluster_codes,
        n_clusters=n_clusters, k_params=k_params, sweeps=sweeps,
        terms=tuple(terms), outcome=outcome, cluster_dim=cluster_dim,
        vcov_type=vcov_type,
    )


def _sandwich(prep: _Prepared, resid: np.ndarray, bread_inv: np.ndarray) -> np.ndarray:
    n = prep.y.shape[0]
    G = prep.n_clusters
    k = prep.X.shape[1]
    scores = np.zeros((G, k))
    np.add.at(scores, prep.cluster_codes, (prep.w * resid)[:, None] * prep.X)
    meat = scores.T @ scores
    correction = (G / (G - 1)) * ((n - 1) / (n - prep.k_params))
    return correction * bread_inv @ meat @ bread_inv


def wls_absorbed(
    frame: Frame,
    formula: str,
    fe: FixedEffectSpec | None = None,
    weights: str | None = None,
    cluster: str | None = None,
) -> RegressionFit:
    """Weighted least squares with the fixed effects absorbed.

    Coefficients match the dummy-variable WLS solution; inference is the
    cluster sandwich on ``cluster`` (HC1 when no cluster is given).
    """
    prep = _prepare(frame, formula, fe, weights, cluster)
    A = prep.X.T @ (prep.w[:, None] * prep.X)
    b = prep.X.T @ (prep.w * prep.y)
    try:
        coef = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations are singular: {exc}") from None
    resid = prep.y - prep.X @ coef
    bread_inv = np.linalg.inv(A)
    vcov = _sandwich(prep, resid, bread_inv)

    tss = float(np.sum(prep.w * prep.y**2))
    rss = float(np.sum(prep.w * resid**2))
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    resid_var = rss / (prep.y.shape[0] - prep.k_params)
    return RegressionFit(
        terms=prep.terms, coef=coef, vcov=vcov, nobs=prep.y.shape[0],
        n_clusters=prep.n_clusters, cluster_dim=prep.cluster_dim,
        vcov_type=prep.vcov_type, k_params=prep.k_params,
        r2_within=r2, resid_var=resid_var, sweeps=prep.sweeps,
        outcome=prep.outcome,
    )


# ---------------------------------------------------------------------------
# Treatment designs


def _exposure_by_row(frame: Frame, exposure: ExposureVector) -> np.ndarray:
    occ = frame.column("occ")
    values = exposure.values
    lookup = {o.code: v for o, v in values.items()}
    missing = sorted({c for c in np.unique(occ) if str(c) not in lookup})
    if missing:
        raise ValidationError(
            f"occupations missing from exposure vector: {missing[:5]}"
            + ("" if len(missing) <= 5 else f" (+{len(missing) - 5} more)")
        )
    return np.array([lookup[str(c)] for c in occ], dtype=np.float64)


DID_TERM = "exposure_post"


def did(
    frame: Frame,
    exposure: ExposureVector,
    post_years: Sequence[int],
    fe: FixedEffectSpec,
    cluster: str,
    weights: str | None = "weight",
    controls: Sequence[str] = (),
    outcome: str = "outcome",
) -> RegressionFit:
    """Post-period interaction design with absorbed fixed effects.

    The exposure vector must already be standardized; the single reported
    coefficient is on exposure x post (multiply by 100 for the reporting
    convention).
    """
    if exposure.role != ROLE_STANDARDIZED:
        raise ValidationError(
            f"did() needs a standardized exposure vector, got role {exposure.role!r}"
        )
    post_years = set(int(y) for y in post_years)
    if not post_years:
        raise ValidationError("post_years is empty")
    e = _exposure_by_row(frame, exposure)
    year = frame.column("year").astype(int)
    interaction = e * np.isin(year, sorted(post_years)).astype(np.float64)
    frame = frame.with_column(DID_TERM, interaction)
    formula = f"{outcome} ~ {' + '.join([DID_TERM, *controls])}"
    return wls_absorbed(frame, formula, fe, weights=weights, cluster=cluster)


@dataclass(frozen=True)
class EventStudyFit:
    """Per-year interaction coefficients around a reference year."""

    fit: RegressionFit
    ref_year: int
    years: tuple[int, ...]
    pre_years: tuple[int, ...]
    pre_f: float
    pre_f_pvalue: float

    def coefficient(self, year: int) -> float:
        if year == self.ref_year:
            return 0.0
        return self.fit.coefficient(_year_term(year))

    def se_for(self, year: int) -> float:
        if year == self.ref_year:
            return 0.0
        return self.fit.se_for(_year_term(year))


def _year_term(year: int) -> str:
    return f"exposure_y{year}"


def event_study(
    frame: Frame,
    exposure: ExposureVector,
    ref_year: int,
    fe: FixedEffectSpec,
    cluster: str,
    weights: str | None = "weight",
    controls: Sequence[str] = (),
    outcome: str = "outcome",
) -> EventStudyFit:
    """Year-by-exposure interactions with a joint Wald test on pre years.

    The reference-year interaction is omitted (identically zero); the
    pre-period block is tested with F = W/q against F(q, G-1).
    """
    if exposure.role != ROLE_STANDARDIZED:
        raise ValidationError(
            f"event_study() needs a standardized exposure vector, got {exposure.role!r}"
        )
    year = frame.column("year").astype(int)
    years = sorted(set(int(y) for y in np.unique(year)))
    if ref_year not in years:
        raise ValidationError(f"reference year {ref_year} not present in data")
    pre_years = tuple(y for y in years if y < ref_year)
    if len(pre_years) < 1:
        raise ValidationError("need at least one pre-period year before the reference")
    e = _exposure_by_row(frame, exposure)
    terms = []
    for y in years:
        if y == ref_year:
            continue
        term = _year_term(y)
        frame = frame.with_column(term, e * (year == y).astype(np.float64))
        terms.append(term)
    formula = f"{outcome} ~ {' + '.join([*terms, *controls])}"
    fit = wls_absorbed(frame, formula, fe, weights=weights, cluster=cluster)

    idx = [fit.index(_year_term(y)) for y in pre_years]
    b = fit.coef[idx]
    V = fit.vcov[np.ix_(idx, idx)]
    q = len(idx)
    try:
        wald = float(b @ np.linalg.solve(V, b))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular pre-period covariance block: {exc}") from None
    f_stat = wald / q
    df2 = fit.n_clusters - 1
    pvalue = float(stats.f.sf(f_stat, q, df2))
    return EventStudyFit(
        fit=fit, ref_year=ref_year, years=tuple(years), pre_years=pre_years,
        pre_f=f_stat, pre_f_pvalue=pvalue,
    )


XOCC_TERM = "exposure_z"


def cross_occ_regression(
    outcomes: OccOutcomeTable,
    exposure: ExposureVector,
    weights: OccOutcomeTable | None = None,
) -> RegressionFit:
    """Occupation-level WLS of an outcome on standardized exposure.

    Exposure is z-scored with the employment weights before the fit, so
    the slope is per standard deviation; inference is HC1 over
    occupations.
    """
    from .exposure import standardize  # local import avoids a cycle

    weights = weights or outcomes
    common = sorted(set(outcomes.values) & set(exposure.values) & set(weights.weights))
    if len(common) < 3:
        raise ValidationError("need at least three common occupations")
    sub_weights = OccOutcomeTable(
        weights.label,
        {o: 0.0 for o in common},
        {o: weights.weights[o] for o in common},
    )
    vec = exposure
    if vec.role != ROLE_STANDARDIZED:
        sub = ExposureVector(
            {o: vec.values[o] for o in common}, vec.role, vec.source_label, vec.wave_label
        )
        vec = standardize(sub, sub_weights)
    frame = Frame(
        {
            "outcome": np.array([outcomes.values[o] for o in common]),
            XOCC_TERM: vec.array(common),
            "intercept": np.ones(len(common)),
            "weight": np.array([weights.weights[o] for o in common]),
        }
    )
    return wls_absorbed(
        frame, f"outcome ~ {XOCC_TERM} + intercept", fe=None,
        weights="weight", cluster=None,
    )


# ---------------------------------------------------------------------------
# Wild cluster bootstrap


@dataclass(frozen=True)
class WildClusterBootstrap:
    """Restricted (null-imposed) wild cluster bootstrap for one term."""

    term: str
    coef: float
    se: float
    t_stat: float
    p_value: float
    ci_low: float
    ci_high: float
    replications: int
    n_clusters: int
    seed: int


def wild_cluster_bootstrap(
    frame: Frame,
    formula: str,
    fe: FixedEffectSpec | None,
    weights: str | None,
    cluster: str,
    term: str,
    replications: int = 999,
    seed: int = 0,
    alpha: float = 0.05,
    null_value: float = 0.0,
    chunk: int = 200,
) -> WildClusterBootstrap:
    """Percentile-t interval from Rademacher sign flips of cluster residuals.

    The bootstrap outcome is built from the null-imposed (restricted)
    model, cluster signs are drawn from a seeded counter-based generator,
    and the p-value is the share of |t*| at least as large as |t|.
    """
    if replications < 99:
        raise ValidationError("need at least 99 bootstrap replications")
    prep = _prepare(frame, formula, fe, weights, cluster)
    if prep.n_clusters < 5:
        raise ValidationError("need at least five clusters for the wild bootstrap")
    j = prep.terms.index(term) if term in prep.terms else -1
    if j < 0:
        raise ValidationError(f"term {term!r} not in formula")

    w = prep.w
    X = prep.X
    A = X.T @ (w[:, None] * X)
    Ainv = np.linalg.inv(A)
    coef = Ainv @ (X.T @ (w * prep.y))
    resid = prep.y - X @ coef
    vcov = _sandwich(prep, resid, Ainv)
    se = float(np.sqrt(vcov[j, j]))
    if se == 0.0 or not np.isfinite(se):
        raise NumericalError(f"degenerate standard error for {term!r}")
    t_obs = (float(coef[j]) - null_value) / se

    # Restricted model: impose the null on the target term.
    keep = [i for i in range(X.shape[1]) if i != j]
    y_r = prep.y - null_value * X[:, j]
    if keep:
        Xr = X[:, keep]
        beta_r = np.linalg.solve(Xr.T @ (w[:, None] * Xr), Xr.T @ (w * y_r))
        fitted_r = Xr @ beta_r
    else:
        fitted_r = np.zeros_like(y_r)
    e_r = y_r - fitted_r
    base = fitted_r + null_value * X[:, j]

    G = prep.n_clusters
    n = prep.y.shape[0]
    correction = (G / (G - 1)) * ((n - 1) / (n - prep.k_params))
    a_row = Ainv[j]

    # Per-cluster projections reused across replicates.
    order = np.argsort(prep.cluster_codes, kind="stable")
    sorted_codes = prep.cluster_codes[order]
    boundaries = np.searchsorted(sorted_codes, np.arange(G + 1))
    cluster_rows = [order[boundaries[g]:boundaries[g + 1]] for g in range(G)]

    rng = make_rng(seed)
    t_stats = np.empty(replications)
    done = 0
    while done < replications:
        b = min(chunk, replications - done)
        signs = rng.choice(np.array([-1.0, 1.0]), size=(G, b))
        Z = e_r[:, None] * signs[prep.cluster_codes]
        if prep.fe_codes.size:
            Z, _ = kernels.demean(Z, prep.fe_codes, w, 1e-10, 10_000)
        Ystar = base[:, None] + Z
        Bhat = Ainv @ (X.T @ (w[:, None] * Ystar))
        Estar = Ystar - X @ Bhat
        sq = np.zeros(b)
        for g in range(G):
            rows = cluster_rows[g]
            proj = (a_row @ X[rows].T) * w[rows]
            sq += (proj @ Estar[rows]) ** 2
        se_star = np.sqrt(correction * sq)
        valid = se_star > 0
        t_chunk = np.full(b, np.nan)
        t_chunk[valid] = (Bhat[j, valid] - null_value) / se_star[valid]
        t_stats[done:done + b] = t_chunk
        done += b

    finite = np.isfinite(t_stats)
    if not finite.any():
        raise NumericalError("all bootstrap replications produced degenerate fits")
    abs_t = np.abs(t_stats[finite])
    p = float(np.mean(abs_t >= abs(t_obs)))
    t_crit = float(np.quantile(abs_t, 1.0 - alpha))
    return WildClusterBootstrap(
        term=term, coef=float(coef[j]), se=se, t_stat=t_obs, p_value=p,
        ci_low=float(coef[j]) - t_crit * se, ci_high=float(coef[j]) + t_crit * se,
        replications=replications, n_clusters=G, seed=seed,
    )


# ---------------------------------------------------------------------------
# Meta-analysis and rank statistics


@dataclass(frozen=True)
class CochranQ:
    q: float
    df: int
    p_value: float


def cochran_q(coefs: Sequence[float], ses: Sequence[float]) -> CochranQ:
    """Fixed-effect homogeneity test across coefficient estimates."""
    coefs = np.asarray(coefs, dtype=float)
    ses = np.asarray(ses, dtype=float)
    if coefs.shape != ses.shape:
        raise ValidationError("coefficient and SE lists have different lengths")
    if coefs.size < 2:
        raise ValidationError("need at least two coefficients")
    if np.any(ses <= 0):
        raise ValidationError("standard errors must be positive")
    w = 1.0 / ses**2
    pooled = float(np.sum(w * coefs) / np.sum(w))
    q = float(np.sum(w * (coefs - pooled) ** 2))
    df = coefs.size - 1
    return CochranQ(q=q, df=df, p_value=float(stats.chi2.sf(q, df)))


def _as_occ_values(x) -> Mapping[OccId, float]:
    if isinstance(x, ExposureVector):
        return x.values
    if isinstance(x, ShareTable):
        return x.entries
    if isinstance(x, OccOutcomeTable):
        return x.values
    if isinstance(x, Mapping):
        return x
    raise ValidationError(f"cannot rank a {type(x).__name__}")


def spearman(x, y) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    xv, yv = _as_occ_values(x), _as_occ_values(y)
    common = sorted(set(xv) & set(yv))
    if len(common) < 2:
        raise ValidationError("need at least two common occupations")
    a = np.array([xv[o] for o in common], dtype=float)
    b = np.array([yv[o] for o in common], dtype=float)
    return spearman_arrays(a, b)


def spearman_arrays(a: np.ndarray, b: np.ndarray) -> float:
    ra = stats.rankdata(a)
    rb = stats.rankdata(b)
    ra = ra - ra.mean()
    rb = rb - rb.mean()
    denom = np.sqrt(np.sum(ra**2) * np.sum(rb**2))
    if denom == 0:
        raise ValidationError("rank correlation undefined for a constant ranking")
    return float(np.sum(ra * rb) / denom)
