"""Probability limits, projection statistics, and identification bounds.

Regressing an outcome on a selected proxy instead of true exposure moves
the OLS coefficient to beta * lambda * kappa / (lambda^2 * kappa + 1),
where lambda is the projection slope of the proxy on true exposure and
kappa the signal-to-noise ratio Var(E) / Var(v). With lambda = 1 this is
the classical attenuation factor kappa / (kappa + 1); with lambda below
one and little projection noise the coefficient is amplified instead.
Baseline and reweighted estimates bracket the structural coefficient
under the maintained ordering condition (within-occupation selection
pushing the same way as between-occupation selection), which is what the
bound constructor and its coverage tests operationalize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sp_stats

from .errors import ValidationError
from .regression import FitSummary, RegressionFit, spearman_arrays

_NEGATIVE_VAR_TOL = 1e-12


@dataclass(frozen=True)
class ProjectionStats:
    """Linear projection of a proxy on true exposure."""

    lambda_: float
    var_e: float
    sigma2_v: float
    kappa: float
    clamped: bool = False

    def __post_init__(self):
        if self.var_e <= 0:
            raise ValidationError("Var(E) must be positive")
        if self.sigma2_v < 0:
            raise ValidationError("residual projection variance cannot be negative")


def demeaned_ols_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Slope of y on x through the origin after demeaning both."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = float(xc @ xc)
    if denom == 0:
        raise ValidationError("zero variance regressor")
    return float(xc @ yc) / denom


def projection_stats(e_true: np.ndarray, proxy: np.ndarray) -> ProjectionStats:
    """Estimate lambda, Var(E), sigma^2_v, and kappa from paired draws.

    The variance identity Var(proxy) = lambda^2 Var(E) + sigma^2_v holds by
    construction; tiny negative sigma^2_v from float cancellation is
    clamped to zero and flagged.
    """
    e = np.asarray(e_true, dtype=float)
    p = np.asarray(proxy, dtype=float)
    if e.shape != p.shape:
        raise ValidationError("true exposure and proxy must have equal length")
    if e.size < 2:
        raise ValidationError("need at least two observations")
    e = e - e.mean()
    p = p - p.mean()
    var_e = float(np.mean(e**2))
    if var_e == 0:
        raise ValidationError("Var(E) is zero")
    lam = float(np.mean(e * p)) / var_e
    sigma2_v = float(np.mean(p**2)) - lam**2 * var_e
    clamped = False
    if sigma2_v < 0:
        if sigma2_v < -_NEGATIVE_VAR_TOL * max(1.0, float(np.mean(p**2))):
            raise ValidationError(f"negative projection variance {sigma2_v!r}")
        sigma2_v = 0.0
        clamped = True
    kappa = math.inf if sigma2_v == 0 else var_e / sigma2_v
    return ProjectionStats(lambda_=lam, var_e=var_e, sigma2_v=sigma2_v, kappa=kappa, clamped=clamped)


def plim(beta: float, stats: ProjectionStats) -> float:
    """Large-sample OLS coefficient when the proxy replaces true exposure."""
    lam, kappa = stats.lambda_, stats.kappa
    if kappa < 0:
        raise ValidationError("kappa must be nonnegative")
    if math.isinf(kappa):
        if lam == 0:
            raise ValidationError("lambda = 0 with zero projection noise is degenerate")
        return beta / lam
    return beta * lam * kappa / (lam**2 * kappa + 1.0)


def plim_from_values(beta: float, lambda_: float, kappa: float) -> float:
    """Formula entry point for the CLI: no variance bookkeeping required."""
    if kappa < 0:
        raise ValidationError("kappa must be nonnegative")
    if math.isinf(kappa):
        return beta / lambda_
    return beta * lambda_ * kappa / (lambda_**2 * kappa + 1.0)


def plim_with_adoption(
    beta: float,
    rho: float,
    cov_e_proxy: float,
    cov_a_proxy: float,
    var_proxy: float,
) -> float:
    """Probability limit when adoption is an omitted outcome determinant."""
    if var_proxy <= 0:
        raise ValidationError("Var(proxy) must be positive")
    return (beta * cov_e_proxy + rho * cov_a_proxy) / var_proxy


# ---------------------------------------------------------------------------
# Partial identification


Fitish = RegressionFit | FitSummary | float


def _coef_of(fit: Fitish, term: str | None = None) -> float:
    if isinstance(fit, RegressionFit):
        return fit.coefficient(term or fit.terms[0])
    if isinstance(fit, FitSummary):
        return fit.coef
    return float(fit)


@dataclass(frozen=True)
class IdentifiedSet:
    """Interval between the baseline and reweighted coefficients.

    ``low``/``high`` are magnitudes (the reporting convention); the signed
    endpoints are kept alongside. ``attenuation_share`` is the fraction of
    the baseline magnitude removed by reweighting.
    """

    low: float
    high: float
    width: float
    attenuation_share: float
    baseline_coef: float
    reweighted_coef: float
    signed_low: float
    signed_high: float

    def contains(self, beta: float, *, signed: bool = True) -> bool:
        if signed:
            return self.signed_low <= beta <= self.signed_high
        return self.low <= abs(beta) <= self.high


def bounds(baseline: Fitish, reweighted: Fitish, term: str | None = None) -> IdentifiedSet:
    """Construct the identified set from a baseline/reweighted fit pair."""
    b = _coef_of(baseline, term)
    r = _coef_of(reweighted, term)
    low_mag, high_mag = sorted((abs(b), abs(r)))
    attenuation = 0.0 if b == 0 else (abs(b) - abs(r)) / abs(b)
    return IdentifiedSet(
        low=low_mag,
        high=high_mag,
        width=high_mag - low_mag,
        attenuation_share=attenuation,
        baseline_coef=b,
        reweighted_coef=r,
        signed_low=min(b, r),
        signed_high=max(b, r),
    )


@dataclass(frozen=True)
class SpanDecomposition:
    """Cross-wave coefficient span before and after reweighting."""

    span_base: float
    span_rw: float
    span_ratio: float
    closure: float
    degenerate: bool = False


def span_decomposition(
    wave_fits_baseline: Sequence[Fitish],
    wave_fits_reweighted: Sequence[Fitish],
    term: str | None = None,
) -> SpanDecomposition:
    """Max-minus-min coefficient span per list and the reweighted share.

    The closure (one minus the span ratio) is the fraction of cross-wave
    movement removed by reweighting. A zero baseline span is degenerate;
    the ratio is reported as one with a flag so tables still render.
    """
    if len(wave_fits_baseline) != len(wave_fits_reweighted):
        raise ValidationError("baseline and reweighted fit lists differ in length")
    if len(wave_fits_baseline) < 2:
        raise ValidationError("need at least two waves")
    base = [_coef_of(f, term) for f in wave_fits_baseline]
    rw = [_coef_of(f, term) for f in wave_fits_reweighted]
    span_base = max(base) - min(base)
    span_rw = max(rw) - min(rw)
    if span_base == 0.0:
        return SpanDecomposition(0.0, span_rw, 1.0, 0.0, degenerate=True)
    ratio = span_rw / span_base
    return SpanDecomposition(span_base, span_rw, ratio, 1.0 - ratio)


@dataclass(frozen=True)
class MonotonicityReport:
    """Rank agreement between selection skew and reweighting attenuation."""

    spearman_rho: float | None
    p_value: float | None
    passed: bool
    degenerate: bool = False


def monotonicity_report(runs: Sequence[tuple[float, float]], alpha: float = 0.05) -> MonotonicityReport:
    """Test that attenuation rises with the skew of the platform user base.

    ``runs`` pairs a skew metric (for example sd of log psi) with the
    attenuation share measured at that skew. Constant skew leaves the rank
    correlation undefined and is flagged instead of raised.
    """
    if len(runs) < 3:
        raise ValidationError("need at least three runs")
    skew = np.array([r[0] for r in runs], dtype=float)
    att = np.array([r[1] for r in runs], dtype=float)
    if np.all(skew == skew[0]) or np.all(att == att[0]):
        return MonotonicityReport(None, None, passed=False, degenerate=True)
    rho = spearman_arrays(skew, att)
    n = len(runs)
    # Exact permutation p-value for small sweeps, t-approximation otherwise.
    if n <= 8:
        from itertools import permutations

        count = 0
        total = 0
        for perm in permutations(range(n)):
            total += 1
            if spearman_arrays(skew, att[list(perm)]) >= rho - 1e-12:
                count += 1
        p = count / total
    else:
        t = rho * math.sqrt((n - 2) / max(1e-12, 1 - rho**2))
        p = float(sp_stats.t.sf(t, n - 2))
    return MonotonicityReport(rho, p, passed=bool(rho > 0 and p < alpha))
