"""Descriptive diagnostics: correlation matrices, wave stability,
compositional shift, ranking-gap tests, and allocation comparisons."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats as sp_stats

from .errors import ValidationError
from .regression import _as_occ_values, spearman_arrays
from .rng import make_rng
from .soc import OccId
from .tables import OccOutcomeTable, ShareTable, collapse_to_major


def correlation_matrix(measures: Sequence, labels: Sequence[str] | None = None):
    """Pairwise Spearman rank correlations across exposure measures.

    Each pair is correlated on its own common occupation support (at
    least three occupations required).
    """
    if len(measures) < 2:
        raise ValidationError("need at least two measures")
    maps = [_as_occ_values(m) for m in measures]
    labels = list(labels) if labels else [f"m{i}" for i in range(len(maps))]
    if len(labels) != len(maps):
        raise ValidationError("labels and measures differ in length")
    k = len(maps)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            common = sorted(set(maps[i]) & set(maps[j]))
            if len(common) < 3:
                raise ValidationError(
                    f"measures {labels[i]!r} and {labels[j]!r} share fewer than 3 occupations"
                )
            a = np.array([maps[i][o] for o in common], dtype=float)
            b = np.array([maps[j][o] for o in common], dtype=float)
            out[i, j] = out[j, i] = spearman_arrays(a, b)
    return out, labels


# ---------------------------------------------------------------------------
# Quartile transitions


@dataclass(frozen=True)
class TransitionMatrix:
    """Employment-weighted exposure-quartile movement between two waves."""

    counts: np.ndarray  # 4x4, rows = wave A quartile, cols = wave B quartile
    n_occupations: int
    same_quartile: float
    one_move: float
    two_plus_move: float


def weighted_quartiles(
    values: Mapping[OccId, float], weights: Mapping[OccId, float]
) -> dict[OccId, int]:
    """Assign occupations to employment-weighted quartiles (0..3).

    Sorting is by value with occupation code as the deterministic
    tie-breaker; an occupation's quartile is set by the weighted midpoint
    of its own mass, with boundaries lower-inclusive. The assignment
    depends on values only through their ordering, so any strictly
    monotone transform leaves it unchanged.
    """
    occs = sorted(values, key=lambda o: (values[o], o.code))
    w = np.array([weights[o] for o in occs], dtype=float)
    if np.any(w <= 0):
        raise ValidationError("quartile weights must be positive")
    total = w.sum()
    cum = np.cumsum(w)
    midpoints = cum - w / 2.0
    quart = np.minimum((4.0 * midpoints / total).astype(int), 3)
    return dict(zip(occs, map(int, quart)))


def quartile_transitions(
    wave_a, wave_b, weights: OccOutcomeTable
) -> TransitionMatrix:
    """Cross-tabulate quartile membership across two waves."""
    a_map, b_map = _as_occ_values(wave_a), _as_occ_values(wave_b)
    common = sorted(set(a_map) & set(b_map) & set(weights.weights))
    if len(common) < 4:
        raise ValidationError("need at least four common occupations")
    w = {o: weights.weights[o] for o in common}
    qa = weighted_quartiles({o: a_map[o] for o in common}, w)
    qb = weighted_quartiles({o: b_map[o] for o in common}, w)
    counts = np.zeros((4, 4), dtype=int)
    for o in common:
        counts[qa[o], qb[o]] += 1
    n = len(common)
    moves = np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
    same = counts[moves == 0].sum() / n
    one = counts[moves == 1].sum() / n
    two_plus = counts[moves >= 2].sum() / n
    return TransitionMatrix(counts, n, float(same), float(one), float(two_plus))


# ---------------------------------------------------------------------------
# Compositional shift


def l1_shift(wave_a: ShareTable, wave_b: ShareTable, level: str | None = None) -> float:
    """Sum of absolute share changes between waves, in percentage points."""
    a, b = wave_a, wave_b
    if level is not None:
        if level == "major_group":
            a, b = collapse_to_major(a), collapse_to_major(b)
        elif level != a.level:
            raise ValidationError(f"cannot compute shift at level {level!r}")
    if a.level != b.level:
        raise ValidationError("share tables must be at the same level")
    occs = sorted(set(a.entries) | set(b.entries))
    total = sum(abs(a.entries.get(o, 0.0) - b.entries.get(o, 0.0)) for o in occs)
    return 100.0 * total


@dataclass(frozen=True)
class GrowthRatioCV:
    mean_ratio: float
    cv: float
    n_sub: int


def growth_ratio_cv(
    wave_a: ShareTable, wave_b: ShareTable, subset_major: str
) -> GrowthRatioCV:
    """Dispersion of sub-occupation share growth within one major group.

    A coefficient of variation near zero means proportional growth; a
    large value means the group's movement is concentrated in specific
    sub-occupations (entry of new users rather than uniform behavior
    change).
    """
    occs = [
        o
        for o in sorted(set(wave_a.entries) & set(wave_b.entries))
        if o.major_group == subset_major
    ]
    occs = [o for o in occs if wave_a.entries[o] > 0 and wave_b.entries[o] > 0]
    if len(occs) < 2:
        raise ValidationError(
            f"need at least two sub-occupations with positive share in major group {subset_major}"
        )
    ratios = np.array([wave_b.entries[o] / wave_a.entries[o] for o in occs])
    mean = float(ratios.mean())
    cv = float(ratios.std() / mean)
    return GrowthRatioCV(mean_ratio=mean, cv=cv, n_sub=len(occs))


# ---------------------------------------------------------------------------
# Ranking-gap tests with multiple-testing corrections


def holm_rejections(p_values: Sequence[float], alpha: float) -> list[bool]:
    """Holm-Bonferroni family-wise decisions at level alpha."""
    p = np.asarray(p_values, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p[idx])
        adjusted[idx] = min(1.0, running)
    return [bool(adjusted[i] <= alpha) for i in range(m)]


def bh_rejections(p_values: Sequence[float], q: float) -> list[bool]:
    """Benjamini-Hochberg false-discovery-rate decisions at level q."""
    p = np.asarray(p_values, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    threshold_rank = 0
    for rank, idx in enumerate(order, start=1):
        if p[idx] <= rank * q / m:
            threshold_rank = rank
    reject = np.zeros(m, dtype=bool)
    reject[order[:threshold_rank]] = True
    return reject.tolist()


@dataclass(frozen=True)
class GapOutcomeResult:
    label: str
    rho_a: float
    rho_b: float
    delta: float
    ci_low: float
    ci_high: float
    p_value: float


@dataclass(frozen=True)
class GapTestResult:
    outcomes: tuple[GapOutcomeResult, ...]
    alpha: float
    q: float
    holm_reject: tuple[bool, ...]
    bh_reject: tuple[bool, ...]
    raw_reject: tuple[bool, ...]
    bootstrap_reps: int
    seed: int


def _row_corr(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    uc = u - u.mean(axis=1, keepdims=True)
    vc = v - v.mean(axis=1, keepdims=True)
    denom = np.sqrt((uc**2).sum(axis=1) * (vc**2).sum(axis=1))
    out = np.full(u.shape[0], np.nan)
    ok = denom > 0
    out[ok] = (uc * vc).sum(axis=1)[ok] / denom[ok]
    return out


def _bootstrap_gap(
    y: np.ndarray, a: np.ndarray, b: np.ndarray, reps: int, rng: np.random.Generator
) -> np.ndarray:
    """Occupation-resampled bootstrap draws of the alignment gap."""
    idx = rng.integers(0, y.shape[0], size=(reps, y.shape[0]))
    ry = sp_stats.rankdata(y[idx], axis=1)
    ra = sp_stats.rankdata(a[idx], axis=1)
    rb = sp_stats.rankdata(b[idx], axis=1)
    return _row_corr(ry, ra) - _row_corr(ry, rb)


def _permutation_gap_pvalue(
    y: np.ndarray, a: np.ndarray, b: np.ndarray, delta: float, reps: int,
    rng: np.random.Generator,
) -> float:
    """Exact-null p-value: permute the outcome across occupations.

    Permuting leaves the outcome's rank multiset unchanged, so only the
    pre-ranked arrays are shuffled. Valid (slightly conservative) by
    construction, which keeps Benjamini-Hochberg control honest at small
    occupation counts where a bootstrap-normal p-value is anti-
    conservative.
    """
    ry = sp_stats.rankdata(y)
    ra = sp_stats.rankdata(a)
    rb = sp_stats.rankdata(b)
    perms = np.stack([rng.permutation(ry) for _ in range(reps)])
    draws = _row_corr(perms, np.broadcast_to(ra, perms.shape)) - _row_corr(
        perms, np.broadcast_to(rb, perms.shape)
    )
    return float((1 + np.sum(np.abs(draws) >= abs(delta) - 1e-15)) / (reps + 1))


def ranking_gap_test(
    outcomes: Sequence[OccOutcomeTable],
    ranking_a: ShareTable,
    ranking_b: ShareTable,
    bootstrap_reps: int = 5000,
    seed: int = 0,
    alpha: float = 0.05,
    q: float = 0.10,
) -> GapTestResult:
    """Does one ranking align with occupation outcomes more than another?

    For each outcome the statistic is the difference in Spearman
    alignment, rho(outcome, ranking_a) - rho(outcome, ranking_b). The CI
    is a percentile interval from an occupation-resampled bootstrap; the
    p-value permutes the outcome across occupations (exact under the null
    of no association with either ranking). Holm (family-wise, level
    alpha) and Benjamini-Hochberg (FDR, level q) decisions are reported
    alongside the raw ones.
    """
    if not outcomes:
        raise ValidationError("need at least one outcome table")
    results = []
    p_values = []
    for k, table in enumerate(outcomes):
        common = sorted(set(table.values) & set(ranking_a.entries) & set(ranking_b.entries))
        if len(common) < 5:
            raise ValidationError(
                f"outcome {table.label!r}: support below 5 occupations"
            )
        y = np.array([table.values[o] for o in common])
        a = np.array([ranking_a.entries[o] for o in common])
        b = np.array([ranking_b.entries[o] for o in common])
        rho_a = spearman_arrays(y, a)
        rho_b = spearman_arrays(y, b)
        delta = rho_a - rho_b
        draws = _bootstrap_gap(y, a, b, bootstrap_reps, make_rng(seed, k, 0))
        draws = draws[np.isfinite(draws)]
        if draws.size < bootstrap_reps // 2:
            raise ValidationError(f"outcome {table.label!r}: too many degenerate resamples")
        ci_low, ci_high = np.quantile(draws, [alpha / 2, 1 - alpha / 2])
        p = _permutation_gap_pvalue(y, a, b, delta, bootstrap_reps, make_rng(seed, k, 1))
        results.append(
            GapOutcomeResult(
                label=table.label, rho_a=rho_a, rho_b=rho_b, delta=delta,
                ci_low=float(ci_low), ci_high=float(ci_high), p_value=p,
            )
        )
        p_values.append(p)

    return GapTestResult(
        outcomes=tuple(results),
        alpha=alpha,
        q=q,
        holm_reject=tuple(holm_rejections(p_values, alpha)),
        bh_reject=tuple(bh_rejections(p_values, q)),
        raw_reject=tuple(bool(p <= alpha) for p in p_values),
        bootstrap_reps=bootstrap_reps,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Allocation


def allocate(budget: float, shares: ShareTable) -> dict[OccId, float]:
    """Split a budget across occupations in proportion to shares."""
    if budget <= 0:
        raise ValidationError("budget must be positive")
    total = shares.total()
    if total <= 0:
        raise ValidationError("share table has no mass")
    return {o: budget * s / total for o, s in sorted(shares.entries.items())}


@dataclass(frozen=True)
class AllocationShift:
    shifted_amount: float
    shifted_share: float
    selected: tuple[OccId, ...]


def compare_allocations(
    alloc_a: Mapping[OccId, float],
    alloc_b: Mapping[OccId, float],
    selector: Callable[[OccId], bool],
) -> AllocationShift:
    """Net dollars rule A directs to selected occupations beyond rule B."""
    occs = sorted(set(alloc_a) | set(alloc_b))
    selected = tuple(o for o in occs if selector(o))
    shifted = sum(alloc_a.get(o, 0.0) - alloc_b.get(o, 0.0) for o in selected)
    budget = sum(alloc_a.values())
    return AllocationShift(
        shifted_amount=shifted,
        shifted_share=shifted / budget if budget > 0 else 0.0,
        selected=selected,
    )
