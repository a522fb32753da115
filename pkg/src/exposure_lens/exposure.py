"""Exposure vectors: true scores, platform proxies, reweighting, z-scores.

True exposure for an occupation is the task-time-weighted capability
score sum_k q_{o,k} tau_k. A platform proxy weights capability by the
platform's task mix and occupation mix instead,

    proxy_o = psi_o * sum_k q_p_{o,k} tau_k + u_o,

which decomposes additively as psi_o * E_o + eta_o + u_o. Dividing by
psi_o removes the between-occupation selection component exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError, ZeroPlatformError
from .rng import make_rng
from .selection import SelectionProfile, compute_psi
from .soc import OccId
from .tables import OccOutcomeTable, ShareTable, TaskMatrix, _fmt, _read_rows

ROLE_TRUE = "true"
ROLE_PROXY = "proxy"
ROLE_REWEIGHTED = "reweighted"
ROLE_STANDARDIZED = "standardized"
ROLE_COMPOSITE = "composite"

_ROLES = (ROLE_TRUE, ROLE_PROXY, ROLE_REWEIGHTED, ROLE_STANDARDIZED, ROLE_COMPOSITE)


@dataclass(frozen=True)
class ExposureVector:
    """Per-occupation exposure scores with a role tag."""

    values: Mapping[OccId, float]
    role: str
    source_label: str
    wave_label: str | None = None
    weight_label: str | None = None

    def __post_init__(self) -> None:
        if self.role not in _ROLES:
            raise ValidationError(f"unknown exposure role {self.role!r}")
        if not self.values:
            raise ValidationError(f"{self.source_label}: empty exposure vector")

    def occupations(self) -> list[OccId]:
        return sorted(self.values)

    def array(self, occs: Sequence[OccId] | None = None) -> np.ndarray:
        occs = self.occupations() if occs is None else occs
        return np.array([self.values[o] for o in occs], dtype=float)


def exposure_csv(vector: ExposureVector) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["occ_code", "value", "role"])
    for occ in vector.occupations():
        writer.writerow([occ.code, _fmt(vector.values[occ]), vector.role])
    return buf.getvalue()


def load_exposure(path: str | Path, source_label: str | None = None) -> ExposureVector:
    rows = _read_rows(path, ("occ_code", "value", "role"))
    if not rows:
        raise ValidationError(f"{path}: empty exposure file")
    roles = {row["role"] for row in rows}
    if len(roles) != 1:
        raise ValidationError(f"{path}: mixed roles {sorted(roles)}")
    values = {}
    for row in rows:
        occ = OccId(row["occ_code"])
        if occ in values:
            raise ValidationError(f"{path}: duplicate occupation {occ}")
        values[occ] = float(row["value"])
    return ExposureVector(values, roles.pop(), source_label or str(path))


def true_exposure(tasks: TaskMatrix) -> ExposureVector:
    """Task-time-weighted capability score per occupation."""
    values = {}
    for occ in tasks.occupations():
        b = tasks.bundles[occ]
        values[occ] = float(np.dot(b.q, b.tau))
    return ExposureVector(values, ROLE_TRUE, tasks.source_label)


def platform_proxy(
    tasks: TaskMatrix,
    profile: SelectionProfile,
    noise_sd: float = 0.0,
    seed: int = 0,
) -> ExposureVector:
    """Platform-weighted exposure proxy with optional classical noise.

    With zero noise the output satisfies the additive decomposition
    proxy = psi * true + eta exactly; noise draws are Gaussian, keyed by
    the seed, and assigned in occupation-code order.
    """
    if noise_sd < 0:
        raise ValidationError("noise_sd must be nonnegative")
    occs = tasks.occupations()
    for occ in occs:
        if occ not in profile.psi:
            raise ValidationError(f"missing psi for {occ}")
    noise = np.zeros(len(occs))
    if noise_sd > 0:
        noise = make_rng(seed).normal(0.0, noise_sd, size=len(occs))
    values = {}
    for i, occ in enumerate(occs):
        b = tasks.bundles[occ]
        values[occ] = float(profile.psi[occ] * np.dot(b.q_p, b.tau) + noise[i])
    return ExposureVector(values, ROLE_PROXY, tasks.source_label)


def composite(
    tasks: TaskMatrix,
    conversation_density: ShareTable,
    workforce: ShareTable,
    *,
    per_task: bool = False,
) -> ExposureVector:
    """Conversation-density-weighted capability composite.

    Equals the zero-noise platform proxy with psi computed from the given
    conversation density and workforce tables; swapping the density table
    for another wave substitutes that wave's occupation mix. ``per_task``
    divides each occupation's score by its task count (an alternative
    normalization emitted alongside the raw recipe).
    """
    profile = compute_psi(conversation_density, workforce)
    missing = [o for o in tasks.occupations() if o not in profile.psi]
    if missing:
        raise ValidationError(f"missing psi for {missing[0]} (+{len(missing) - 1} more)")
    values = {}
    for occ in tasks.occupations():
        b = tasks.bundles[occ]
        score = profile.psi[occ] * float(np.dot(b.q_p, b.tau))
        if per_task:
            score /= len(b.task_ids)
        values[occ] = score
    label = f"composite[{conversation_density.source_label}]"
    return ExposureVector(values, ROLE_COMPOSITE, label)


def reweight(proxy: ExposureVector, profile: SelectionProfile) -> ExposureVector:
    """Divide the proxy by psi, removing between-occupation selection."""
    zero = [o for o in proxy.occupations() if profile.psi.get(o, 0.0) == 0.0]
    if zero:
        raise ZeroPlatformError(zero)
    missing = [o for o in proxy.occupations() if o not in profile.psi]
    if missing:
        raise ValidationError(f"missing psi for {missing[0]} (+{len(missing) - 1} more)")
    values = {o: proxy.values[o] / profile.psi[o] for o in proxy.occupations()}
    return ExposureVector(values, ROLE_REWEIGHTED, proxy.source_label, proxy.wave_label)


def weighted_mean_sd(values: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    """Frequency-weighted mean and population standard deviation."""
    mean = float(np.average(values, weights=weights))
    var = float(np.average((values - mean) ** 2, weights=weights))
    return mean, var ** 0.5


def standardize(vector: ExposureVector, weights: OccOutcomeTable) -> ExposureVector:
    """Z-score with frequency weights and the population-SD convention."""
    occs = vector.occupations()
    missing = [o for o in occs if o not in weights.weights]
    if missing:
        raise ValidationError(f"no weight for {missing[0]} (+{len(missing) - 1} more)")
    x = vector.array(occs)
    w = np.array([weights.weights[o] for o in occs], dtype=float)
    mean, sd = weighted_mean_sd(x, w)
    if sd == 0.0:
        raise ValidationError(f"{vector.source_label}: constant vector cannot be standardized")
    z = (x - mean) / sd
    return ExposureVector(
        dict(zip(occs, map(float, z))),
        ROLE_STANDARDIZED,
        vector.source_label,
        vector.wave_label,
        weight_label=weights.label,
    )


@dataclass(frozen=True)
class AggregationSpec:
    """Nonnegative platform weights summing to one."""

    weights: Mapping[str, float]

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValidationError("empty aggregation weights")
        if any(w < 0 for w in self.weights.values()):
            raise ValidationError("aggregation weights must be nonnegative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"aggregation weights sum to {total!r}, not 1")

    @staticmethod
    def proportional(raw: Mapping[str, float]) -> "AggregationSpec":
        total = sum(raw.values())
        if total <= 0:
            raise ValidationError("aggregation weights must have positive total")
        return AggregationSpec({k: v / total for k, v in raw.items()})


@dataclass(frozen=True)
class AggregateResult:
    vector: ExposureVector
    psi_w: Mapping[OccId, float]
    eta_w: Mapping[OccId, float]
    var_delta_w: float
    var_delta_w_bilinear: float
    single_platform_var_delta: Mapping[str, float] = field(default_factory=dict)


def aggregate(
    proxies: Mapping[str, ExposureVector],
    profiles: Mapping[str, SelectionProfile],
    spec: AggregationSpec,
) -> AggregateResult:
    """Weighted cross-platform average of proxies.

    The aggregate inherits the single-platform structure with pooled
    parameters psi_w = sum_p w_p psi_p and eta_w = sum_p w_p eta_p. The
    variance (over occupations) of the pooled selection deviation
    delta_w = psi_w - 1 is returned twice: computed directly, and through
    the bilinear expansion in per-platform variances and covariances. The
    two agree to float precision; the expansion shows when aggregation
    shrinks selection dispersion below any single platform.
    """
    labels = sorted(spec.weights)
    if set(labels) != set(proxies) or set(labels) != set(profiles):
        raise ValidationError("aggregation weights, proxies, and profiles must align")
    occ_sets = [set(proxies[p].values) for p in labels]
    common = sorted(set.intersection(*occ_sets))
    if not common:
        raise ValidationError("no common occupation support across platforms")

    w = np.array([spec.weights[p] for p in labels])
    proxy_mat = np.stack([proxies[p].array(common) for p in labels])
    psi_mat = np.stack(
        [np.array([profiles[p].psi[o] for o in common]) for p in labels]
    )
    eta_mat = np.stack(
        [np.array([profiles[p].eta.get(o, 0.0) for o in common]) for p in labels]
    )

    agg_values = w @ proxy_mat
    psi_w = w @ psi_mat
    eta_w = w @ eta_mat

    delta = psi_mat - 1.0
    delta_w = w @ delta
    var_direct = float(np.var(delta_w))
    cov = np.cov(delta, bias=True) if len(labels) > 1 else np.array([[np.var(delta[0])]])
    cov = np.atleast_2d(cov)
    var_bilinear = float(w @ cov @ w)

    vector = ExposureVector(
        dict(zip(common, map(float, agg_values))),
        ROLE_PROXY,
        "aggregate[" + "+".join(labels) + "]",
    )
    return AggregateResult(
        vector=vector,
        psi_w=dict(zip(common, map(float, psi_w))),
        eta_w=dict(zip(common, map(float, eta_w))),
        var_delta_w=var_direct,
        var_delta_w_bilinear=var_bilinear,
        single_platform_var_delta={
            p: float(np.var(delta[i])) for i, p in enumerate(labels)
        },
    )
