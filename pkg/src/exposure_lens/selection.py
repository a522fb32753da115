"""Platform-selection parameters.

Between occupations, ``psi`` is the ratio of an occupation's platform
conversation share to its workforce employment share. Within occupations,
``theta`` is the cellwise ratio of platform task share to workforce
task-time share. The residual ``eta`` is the within-occupation selection
term psi * sum_k (theta - 1) * q * tau that reweighting cannot remove.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import ValidationError
from .soc import OccId
from .tables import OccOutcomeTable, ShareTable, TaskMatrix

# Reason / flag codes.
ZERO_WORKFORCE = "zero_workforce"
ZERO_PLATFORM = "zero_platform"
TASK_NOT_IN_WORKFORCE = "task_not_in_workforce"


@dataclass(frozen=True)
class SelectionProfile:
    """Per-occupation psi/eta and per-cell theta, with exclusion records.

    ``excluded`` maps occupations dropped outright (reason codes) and
    ``flags`` marks retained occupations needing caution downstream, such
    as zero-platform occupations whose psi is zero.
    """

    psi: Mapping[OccId, float] = field(default_factory=dict)
    theta: Mapping[tuple[OccId, str], float] = field(default_factory=dict)
    eta: Mapping[OccId, float] = field(default_factory=dict)
    excluded: Mapping[OccId, str] = field(default_factory=dict)
    flags: Mapping[OccId, str] = field(default_factory=dict)
    cell_flags: Mapping[tuple[OccId, str], str] = field(default_factory=dict)

    def occupations(self) -> list[OccId]:
        return sorted(self.psi)

    def theta_for(self, occ: OccId, task_ids) -> np.ndarray:
        return np.array([self.theta[(occ, t)] for t in task_ids], dtype=float)


def compute_psi(platform: ShareTable, workforce: ShareTable) -> SelectionProfile:
    """Ratio of platform share to workforce share, occupation by occupation.

    Occupations with zero workforce share are excluded (the ratio is
    undefined); occupations missing from the platform table or with zero
    platform share are retained at psi = 0 and flagged, so that raw-proxy
    analyses keep them while reweighting refuses them.
    """
    if platform.level != workforce.level:
        raise ValidationError(
            f"level mismatch: platform is {platform.level}, workforce is {workforce.level}"
        )
    common = set(platform.entries) & set(workforce.entries)
    if not common:
        raise ValidationError("platform and workforce tables share no occupations")

    psi: dict[OccId, float] = {}
    excluded: dict[OccId, str] = {}
    flags: dict[OccId, str] = {}
    for occ in sorted(set(workforce.entries) | set(platform.entries)):
        f = workforce.entries.get(occ, 0.0)
        f_p = platform.entries.get(occ, 0.0)
        if f == 0.0:
            excluded[occ] = ZERO_WORKFORCE
            continue
        psi[occ] = f_p / f
        if f_p == 0.0:
            flags[occ] = ZERO_PLATFORM
    return SelectionProfile(psi=psi, excluded=excluded, flags=flags)


def compute_theta(tasks: TaskMatrix, profile: SelectionProfile | None = None) -> SelectionProfile:
    """Cellwise platform-to-workforce task share ratios.

    Cells with zero workforce share but positive platform share have no
    defined ratio and are flagged rather than raised.
    """
    base = profile or SelectionProfile()
    theta: dict[tuple[OccId, str], float] = {}
    cell_flags: dict[tuple[OccId, str], str] = dict(base.cell_flags)
    for occ in tasks.occupations():
        b = tasks.bundles[occ]
        for i, task_id in enumerate(b.task_ids):
            if b.q[i] == 0.0:
                if b.q_p[i] > 0.0:
                    cell_flags[(occ, task_id)] = TASK_NOT_IN_WORKFORCE
                continue
            theta[(occ, task_id)] = float(b.q_p[i] / b.q[i])
    return replace(base, theta=theta, cell_flags=cell_flags)


def compute_eta(profile: SelectionProfile, tasks: TaskMatrix) -> SelectionProfile:
    """Within-occupation selection residual psi * sum_k (theta - 1) q tau."""
    eta: dict[OccId, float] = {}
    for occ in tasks.occupations():
        if occ not in profile.psi:
            raise ValidationError(f"missing psi for {occ}")
        b = tasks.bundles[occ]
        total = 0.0
        for i, task_id in enumerate(b.task_ids):
            if b.q[i] == 0.0:
                continue
            if (occ, task_id) not in profile.theta:
                raise ValidationError(f"missing theta for {occ} task {task_id}")
            total += (profile.theta[(occ, task_id)] - 1.0) * b.q[i] * b.tau[i]
        eta[occ] = profile.psi[occ] * total
    return replace(profile, eta=eta)


@dataclass(frozen=True)
class SkewMetrics:
    """Dispersion of psi across occupations."""

    var_psi: float
    sd_log_psi: float
    max_min_ratio: float
    var_psi_weighted: float | None = None
    sd_log_psi_weighted: float | None = None
    n_included: int = 0
    log_excluded: tuple[OccId, ...] = ()


def skew_metrics(
    profile: SelectionProfile, weights: OccOutcomeTable | None = None
) -> SkewMetrics:
    """Variance of psi, SD of log psi, and the max/min psi ratio.

    Occupations with psi = 0 enter the variance but are excluded (and
    reported) from the log-based metrics and the ratio.
    """
    occs = profile.occupations()
    if not occs:
        raise ValidationError("empty selection profile")
    values = np.array([profile.psi[o] for o in occs], dtype=float)
    positive = values > 0
    log_excluded = tuple(o for o, keep in zip(occs, positive) if not keep)
    if positive.sum() < 2:
        raise ValidationError("need at least two occupations with psi > 0")

    pos = values[positive]
    var_psi = float(np.var(values))
    sd_log = float(np.std(np.log(pos)))
    ratio = float(pos.max() / pos.min())

    var_w = sd_log_w = None
    if weights is not None:
        w = np.array([weights.weights[o] for o in occs], dtype=float)
        mean_w = float(np.average(values, weights=w))
        var_w = float(np.average((values - mean_w) ** 2, weights=w))
        wp = w[positive]
        logs = np.log(pos)
        mu = float(np.average(logs, weights=wp))
        sd_log_w = math.sqrt(float(np.average((logs - mu) ** 2, weights=wp)))

    return SkewMetrics(
        var_psi=var_psi,
        sd_log_psi=sd_log,
        max_min_ratio=ratio,
        var_psi_weighted=var_w,
        sd_log_psi_weighted=sd_log_w,
        n_included=int(positive.sum()),
        log_excluded=log_excluded,
    )
