"""Synthetic data generators for Monte Carlo verification.

Two generators share one configuration: an occupation-level cross section
following the proxy decomposition proxy = psi * E + eta + u with
structural outcome Y = beta * E + rho * A + eps, and a person-year panel
whose outcome carries occupation, state, and year effects plus a
treatment term beta * (E x Post). All draws come from a counter-based
generator keyed by (seed, stream, replicate), so replicate r is
reproducible in isolation and across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .exposure import ROLE_PROXY, ROLE_REWEIGHTED, ROLE_TRUE, ExposureVector
from .regression import Frame
from .rng import make_rng
from .selection import SelectionProfile
from .soc import MAJOR_GROUPS, OccId

_STREAM_CROSS_SECTION = 0
_STREAM_PANEL = 1


# ---------------------------------------------------------------------------
# Distribution specifications


@dataclass(frozen=True)
class LognormalPsi:
    mu: float = 0.0
    sigma: float = 0.5

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError("lognormal sigma must be nonnegative")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.exp(rng.normal(self.mu, self.sigma, size=n)) if self.sigma > 0 else np.full(n, np.exp(self.mu))


@dataclass(frozen=True)
class ConstantPsi:
    value: float = 1.0

    def __post_init__(self):
        if self.value <= 0:
            raise ValidationError("constant psi must be positive")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.full(n, self.value)


@dataclass(frozen=True)
class EmpiricalPsi:
    """Resample psi from an observed table of overrepresentation ratios."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValidationError("empirical psi needs at least one value")
        if any(v <= 0 for v in self.values):
            raise ValidationError("empirical psi values must be positive")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(np.asarray(self.values, dtype=float), size=n, replace=True)


@dataclass(frozen=True)
class UniformExposure:
    low: float = 0.05
    high: float = 0.45

    def __post_init__(self):
        if not (0 <= self.low < self.high <= 1):
            raise ValidationError("uniform exposure needs 0 <= low < high <= 1")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=n)

    @property
    def upper(self) -> float:
        return self.high


@dataclass(frozen=True)
class BetaExposure:
    a: float = 2.0
    b: float = 5.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValidationError("beta exposure needs positive shape parameters")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.beta(self.a, self.b, size=n)

    @property
    def upper(self) -> float:
        return 1.0


@dataclass(frozen=True)
class ThetaTilt:
    """Within-occupation task selection.

    Platform task shares are tilted by exp(strength * r_k), where r_k is
    the task's relative capability. Positive strength selects high-score
    tasks (selection in the same direction as overrepresentation of
    exposed occupations); negative strength selects against them.
    """

    strength: float


PSI_DISTS = {"lognormal": LognormalPsi, "constant": ConstantPsi, "empirical": EmpiricalPsi}
EXPOSURE_DISTS = {"uniform": UniformExposure, "beta": BetaExposure}


def _dist_from_dict(raw, table, what):
    if raw is None:
        raise ValidationError(f"missing {what} specification")
    kind = raw.get("kind")
    if kind not in table:
        raise ValidationError(f"unknown {what} kind {kind!r} (choices: {sorted(table)})")
    params = {k: v for k, v in raw.items() if k != "kind"}
    if kind == "empirical" and "values" in params:
        params["values"] = tuple(float(v) for v in params["values"])
    return table[kind](**params)


def _dist_to_dict(dist) -> dict:
    for name, table in (("psi", PSI_DISTS), ("exposure", EXPOSURE_DISTS)):
        for kind, cls in table.items():
            if isinstance(dist, cls):
                out = {"kind": kind}
                for f in dist.__dataclass_fields__:
                    v = getattr(dist, f)
                    out[f] = list(v) if isinstance(v, tuple) else v
                return out
    raise ValidationError(f"cannot serialize distribution {dist!r}")


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class DGPConfig:
    """Parameters of the synthetic proxy and outcome process."""

    n_occ: int
    beta: float
    psi_dist: object = field(default_factory=LognormalPsi)
    theta_mode: ThetaTilt | None = None
    rho_adoption: float = 0.0
    noise_sd_u: float = 0.0
    noise_sd_eps: float = 0.0
    exposure_dist: object = field(default_factory=UniformExposure)
    n_tasks: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.n_occ < 2:
            raise ValidationError("n_occ must be at least 2")
        if self.noise_sd_u < 0 or self.noise_sd_eps < 0:
            raise ValidationError("noise standard deviations must be nonnegative")
        if self.theta_mode is not None and self.n_tasks < 2:
            raise ValidationError("task selection needs at least 2 tasks")

    @staticmethod
    def from_json_dict(raw: Mapping) -> "DGPConfig":
        theta = raw.get("theta_mode")
        theta_mode = None if theta in (None, "none") else ThetaTilt(float(theta["strength"]))
        return DGPConfig(
            n_occ=int(raw["n_occ"]),
            beta=float(raw["beta"]),
            psi_dist=_dist_from_dict(raw.get("psi_dist", {"kind": "lognormal"}), PSI_DISTS, "psi_dist"),
            theta_mode=theta_mode,
            rho_adoption=float(raw.get("rho_adoption", 0.0)),
            noise_sd_u=float(raw.get("noise_sd_u", 0.0)),
            noise_sd_eps=float(raw.get("noise_sd_eps", 0.0)),
            exposure_dist=_dist_from_dict(
                raw.get("exposure_dist", {"kind": "uniform"}), EXPOSURE_DISTS, "exposure_dist"
            ),
            n_tasks=int(raw.get("n_tasks", 6)),
            seed=int(raw.get("seed", 0)),
        )

    def to_json_dict(self) -> dict:
        return {
            "n_occ": self.n_occ,
            "beta": self.beta,
            "psi_dist": _dist_to_dict(self.psi_dist),
            "theta_mode": None if self.theta_mode is None else {"strength": self.theta_mode.strength},
            "rho_adoption": self.rho_adoption,
            "noise_sd_u": self.noise_sd_u,
            "noise_sd_eps": self.noise_sd_eps,
            "exposure_dist": _dist_to_dict(self.exposure_dist),
            "n_tasks": self.n_tasks,
            "seed": self.seed,
        }


def occupation_codes(n: int) -> list[str]:
    """Synthetic six-digit codes cycling through the major groups."""
    majors = MAJOR_GROUPS[:22]
    if n > 9_999 * len(majors):
        raise ValidationError(f"cannot label {n} synthetic occupations")
    return [f"{majors[i % len(majors)]}{i // len(majors):04d}" for i in range(n)]


# ---------------------------------------------------------------------------
# Occupation-level cross section


@dataclass(frozen=True)
class OccCrossSection:
    """One synthetic cross-section draw.

    ``e``, ``proxy``, ``reweighted``, and ``y`` are demeaned (the form the
    projection algebra works in); the ``*_raw`` arrays keep levels so that
    reweighting and table interop stay exact.
    """

    config: DGPConfig
    replicate: int
    e_raw: np.ndarray
    proxy_raw: np.ndarray
    reweighted_raw: np.ndarray
    y_raw: np.ndarray
    psi: np.ndarray
    eta: np.ndarray
    u: np.ndarray
    eps: np.ndarray
    adoption: np.ndarray
    e: np.ndarray
    proxy: np.ndarray
    reweighted: np.ndarray
    y: np.ndarray

    @property
    def n_occ(self) -> int:
        return self.e.shape[0]

    def codes(self) -> list[str]:
        return occupation_codes(self.n_occ)

    def exposure_vectors(self) -> dict[str, ExposureVector]:
        occs = [OccId(c) for c in self.codes()]
        label = "synthetic"
        return {
            "true": ExposureVector(dict(zip(occs, map(float, self.e_raw))), ROLE_TRUE, label),
            "proxy": ExposureVector(dict(zip(occs, map(float, self.proxy_raw))), ROLE_PROXY, label),
            "reweighted": ExposureVector(
                dict(zip(occs, map(float, self.reweighted_raw))), ROLE_REWEIGHTED, label
            ),
        }

    def selection_profile(self) -> SelectionProfile:
        occs = [OccId(c) for c in self.codes()]
        return SelectionProfile(
            psi=dict(zip(occs, map(float, self.psi))),
            eta=dict(zip(occs, map(float, self.eta))),
        )


_R_SPREAD = 0.75  # relative capability pattern stays in [1 - spread, 1 + spread]


def _task_structure(cfg: DGPConfig, rng: np.random.Generator):
    """Shared task-time shares q and relative capability pattern r.

    Capability scores scale as tau = E_o * r, so every occupation orders
    its tasks identically; r is built with q-weighted mean one (keeping
    sum_k q tau = E_o) and bounded inside [0.25, 1.75].
    """
    q = rng.dirichlet(np.full(cfg.n_tasks, 5.0))
    w = rng.uniform(-1.0, 1.0, size=cfg.n_tasks)
    w = w - float(q @ w)
    peak = float(np.abs(w).max())
    if peak > 0:
        w *= _R_SPREAD / peak
    return q, 1.0 + w


def gen_occ_cross_section(cfg: DGPConfig, replicate: int = 0) -> OccCrossSection:
    """Draw one occupation-level cross section from the configuration."""
    rng = make_rng(cfg.seed, _STREAM_CROSS_SECTION, replicate)
    n = cfg.n_occ

    if cfg.theta_mode is None:
        e_raw = cfg.exposure_dist.draw(rng, n)
        tilt_gap = np.zeros(n)
    else:
        if cfg.exposure_dist.upper * (1.0 + _R_SPREAD) > 1.0 + 1e-12:
            raise ValidationError(
                "exposure distribution too wide for task-level scores in [0, 1]; "
                f"keep the upper bound at or below {1.0 / (1.0 + _R_SPREAD):.3f}"
            )
        q, r = _task_structure(cfg, rng)
        e_raw = cfg.exposure_dist.draw(rng, n)
        s = cfg.theta_mode.strength
        q_p = q * np.exp(s * r)
        q_p = q_p / q_p.sum()
        theta = q_p / q
        # sum_k (theta - 1) q tau = e_raw * (sum_k theta q r - 1)
        tilt_gap = e_raw * float((theta * q) @ r - 1.0)

    psi = cfg.psi_dist.draw(rng, n)
    if cfg.n_occ != psi.shape[0]:
        raise ValidationError("psi draw size mismatch")
    u = rng.normal(0.0, cfg.noise_sd_u, size=n) if cfg.noise_sd_u > 0 else np.zeros(n)
    eps = rng.normal(0.0, cfg.noise_sd_eps, size=n) if cfg.noise_sd_eps > 0 else np.zeros(n)

    eta = psi * tilt_gap
    proxy_raw = psi * e_raw + eta + u
    reweighted_raw = proxy_raw / psi

    if cfg.rho_adoption != 0.0:
        log_psi = np.log(psi)
        sd = log_psi.std()
        adoption = (log_psi - log_psi.mean()) / sd if sd > 0 else np.zeros(n)
    else:
        adoption = np.zeros(n)
    y_raw = cfg.beta * e_raw + cfg.rho_adoption * adoption + eps

    return OccCrossSection(
        config=cfg,
        replicate=replicate,
        e_raw=e_raw,
        proxy_raw=proxy_raw,
        reweighted_raw=reweighted_raw,
        y_raw=y_raw,
        psi=psi,
        eta=eta,
        u=u,
        eps=eps,
        adoption=adoption,
        e=e_raw - e_raw.mean(),
        proxy=proxy_raw - proxy_raw.mean(),
        reweighted=reweighted_raw - reweighted_raw.mean(),
        y=y_raw - y_raw.mean(),
    )


# ---------------------------------------------------------------------------
# Person-year panel


@dataclass(frozen=True)
class PanelDataset:
    """Person-year records with occupation, state, and year identifiers."""

    occ: np.ndarray
    person: np.ndarray
    state: np.ndarray
    year: np.ndarray
    outcome: np.ndarray
    weight: np.ndarray
    controls: np.ndarray
    control_names: tuple[str, ...]
    post_years: tuple[int, ...]
    cross_section: OccCrossSection | None = None

    def __post_init__(self):
        years = np.unique(self.year)
        if years.size > 1 and np.any(np.diff(years) != 1):
            raise ValidationError("panel years must form a contiguous range")
        if np.any(self.weight <= 0):
            raise ValidationError("panel weights must be positive")

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    def frame(self) -> Frame:
        columns = {
            "occ": self.occ,
            "person": self.person,
            "state": self.state,
            "year": self.year,
            "outcome": self.outcome,
            "weight": self.weight,
        }
        for i, name in enumerate(self.control_names):
            columns[name] = self.controls[:, i]
        return Frame(columns)

    def empty_cells(self) -> list[tuple[str, int]]:
        """Occupation-year cells with zero records, if the panel was built
        against a larger occupation universe."""
        occs = np.unique(self.occ)
        years = np.unique(self.year)
        seen = set(zip(self.occ.tolist(), self.year.tolist()))
        return [(o, int(y)) for o in occs.tolist() for y in years if (o, y) not in seen]


def panel_csv(panel: PanelDataset) -> str:
    """Canonical CSV for a person-year panel."""
    import csv
    import io

    from .tables import _fmt

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["person", "occ_code", "state", "year", "outcome", "weight", *panel.control_names])
    for i in range(panel.n):
        writer.writerow(
            [
                int(panel.person[i]),
                str(panel.occ[i]),
                int(panel.state[i]),
                int(panel.year[i]),
                _fmt(panel.outcome[i]),
                _fmt(panel.weight[i]),
                *(_fmt(panel.controls[i, j]) for j in range(len(panel.control_names))),
            ]
        )
    return buf.getvalue()


def load_panel(path) -> PanelDataset:
    """Read a panel written by ``panel_csv``."""
    import csv

    from .errors import ValidationError

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:6] != ["person", "occ_code", "state", "year", "outcome", "weight"]:
            raise ValidationError(f"{path}: not a panel CSV (bad header)")
        control_names = tuple(header[6:])
        rows = list(reader)
    if not rows:
        raise ValidationError(f"{path}: empty panel")
    n = len(rows)
    person = np.empty(n, dtype=np.int64)
    occ = np.empty(n, dtype=object)
    state = np.empty(n, dtype=np.int64)
    year = np.empty(n, dtype=np.int64)
    outcome = np.empty(n)
    weight = np.empty(n)
    controls = np.empty((n, len(control_names)))
    for i, row in enumerate(rows):
        person[i] = int(row[0])
        occ[i] = row[1]
        state[i] = int(row[2])
        year[i] = int(row[3])
        outcome[i] = float(row[4])
        weight[i] = float(row[5])
        for j in range(len(control_names)):
            controls[i, j] = float(row[6 + j])
    return PanelDataset(
        occ=occ.astype(str),
        person=person,
        state=state,
        year=year,
        outcome=outcome,
        weight=weight,
        controls=controls,
        control_names=control_names,
        post_years=(),
    )


def cross_section_csv(draw: OccCrossSection) -> str:
    """Canonical CSV for one occupation-level cross-section draw."""
    import csv
    import io

    from .tables import _fmt

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["occ_code", "e_true", "proxy", "reweighted", "outcome", "psi", "eta", "u"])
    codes = draw.codes()
    for i, code in enumerate(codes):
        writer.writerow(
            [
                code,
                _fmt(draw.e_raw[i]),
                _fmt(draw.proxy_raw[i]),
                _fmt(draw.reweighted_raw[i]),
                _fmt(draw.y_raw[i]),
                _fmt(draw.psi[i]),
                _fmt(draw.eta[i]),
                _fmt(draw.u[i]),
            ]
        )
    return buf.getvalue()


def gen_panel(
    cfg: DGPConfig,
    years: Sequence[int],
    n_states: int,
    persons_per_occ_year: int,
    post_years: Sequence[int],
    replicate: int = 0,
    fe_sd: tuple[float, float, float] = (0.05, 0.05, 0.05),
    n_controls: int = 2,
    binary: bool = False,
) -> PanelDataset:
    """Generate a person-year panel with a treatment term beta * (E x Post).

    Occupation, state, and year effects are drawn once per level with the
    given standard deviations; exposure attaches at the occupation level,
    so precision gains from more persons never remove proxy bias. In
    binary mode the outcome is a Bernoulli draw around a linear index
    (a linear probability model).
    """
    years = sorted(int(y) for y in years)
    if not years or any(b - a != 1 for a, b in zip(years, years[1:])):
        raise ValidationError("years must form a contiguous range")
    post = sorted(int(y) for y in post_years)
    if not set(post) <= set(years):
        raise ValidationError("post_years must be a subset of years")
    if n_states < 2 or persons_per_occ_year < 1:
        raise ValidationError("need at least 2 states and 1 person per cell")

    cross = gen_occ_cross_section(cfg, replicate)
    rng = make_rng(cfg.seed, _STREAM_PANEL, replicate)
    codes = np.array(cross.codes())
    n_occ = codes.shape[0]
    n_years = len(years)
    n = n_occ * n_years * persons_per_occ_year

    alpha_occ = rng.normal(0.0, fe_sd[0], size=n_occ) if fe_sd[0] > 0 else np.zeros(n_occ)
    gamma_state = rng.normal(0.0, fe_sd[1], size=n_states) if fe_sd[1] > 0 else np.zeros(n_states)
    delta_year = rng.normal(0.0, fe_sd[2], size=n_years) if fe_sd[2] > 0 else np.zeros(n_years)
    control_coefs = rng.normal(0.0, 0.05, size=n_controls) if n_controls else np.zeros(0)

    occ_idx = np.repeat(np.arange(n_occ), n_years * persons_per_occ_year)
    year_idx = np.tile(np.repeat(np.arange(n_years), persons_per_occ_year), n_occ)
    state = rng.integers(0, n_states, size=n)
    controls = rng.normal(0.0, 1.0, size=(n, n_controls)) if n_controls else np.zeros((n, 0))
    eps = rng.normal(0.0, cfg.noise_sd_eps, size=n) if cfg.noise_sd_eps > 0 else np.zeros(n)

    year_values = np.asarray(years)[year_idx]
    is_post = np.isin(year_values, post).astype(np.float64)
    index = (
        alpha_occ[occ_idx]
        + gamma_state[state]
        + delta_year[year_idx]
        + cfg.beta * cross.e_raw[occ_idx] * is_post
        + controls @ control_coefs
        + eps
    )
    if binary:
        p = np.clip(0.5 + index, 0.02, 0.98)
        outcome = (rng.random(n) < p).astype(np.float64)
    else:
        outcome = index

    return PanelDataset(
        occ=codes[occ_idx],
        person=np.arange(n, dtype=np.int64),
        state=state.astype(np.int64),
        year=year_values.astype(np.int64),
        outcome=outcome,
        weight=np.ones(n),
        controls=controls,
        control_names=tuple(f"ctrl{i}" for i in range(n_controls)),
        post_years=tuple(post),
        cross_section=cross,
    )
