"""Occupation-level input tables: loading, validation, and reshaping.

All tabular interchange uses canonical CSV: UTF-8, fixed lowercase
headers, decimal points, no thousands separators, rows sorted by
occupation code (and task id). Floats are written with ``repr`` so that a
write/reload round trip is exact.

Schemas:

======================  ==========================================
share table             ``occ_code,share``
task matrix             ``occ_code,task_id,q,q_p,tau``
outcome table           ``occ_code,outcome,weight``
crosswalk               ``source_code,target_code,weight``
======================  ==========================================
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .soc import LEVEL_DETAILED, LEVEL_MAJOR, OccId

# Tolerances for share normalization. A raw sum may deviate from one by at
# most RAW_SUM_TOL before an explicit normalize=True is required; after
# renormalization sums must hold to POST_SUM_TOL.
RAW_SUM_TOL = 1e-6
POST_SUM_TOL = 1e-9


def _fmt(x: float) -> str:
    """Shortest decimal representation that round-trips through float()."""
    return repr(float(x))


def _read_rows(path: str | Path, expected_header: Sequence[str]) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(expected_header):
            raise ValidationError(
                f"{path}: expected header {','.join(expected_header)!r}, "
                f"got {','.join(reader.fieldnames or [])!r}"
            )
        return list(reader)


def _parse_float(raw: str, path: str | Path, column: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValidationError(f"{path}: non-numeric {column} value {raw!r}") from None


def _infer_level(occs: Iterable[OccId], context: str) -> str:
    levels = {o.level for o in occs}
    if len(levels) != 1:
        raise ValidationError(f"{context}: mixed detailed and major-group codes")
    return levels.pop()


@dataclass(frozen=True)
class ShareTable:
    """A distribution of share mass over occupations.

    ``normalized`` records whether the entries sum to one; tables produced
    by crosswalks with incomplete coverage carry their matched mass
    unnormalized.
    """

    source_label: str
    entries: Mapping[OccId, float]
    level: str
    normalized: bool = True

    def __post_init__(self) -> None:
        for occ, share in self.entries.items():
            if share < 0:
                raise ValidationError(
                    f"{self.source_label}: negative share {share!r} for {occ}"
                )
            if occ.level != self.level:
                raise ValidationError(
                    f"{self.source_label}: code {occ} does not match level {self.level}"
                )
        if self.normalized and abs(self.total() - 1.0) > POST_SUM_TOL:
            raise ValidationError(
                f"{self.source_label}: shares sum to {self.total()!r}, not 1"
            )

    def total(self) -> float:
        return float(sum(self.entries.values()))

    def occupations(self) -> list[OccId]:
        return sorted(self.entries)

    def share(self, occ: OccId) -> float:
        return self.entries[occ]

    @staticmethod
    def from_shares(
        source_label: str,
        shares: Mapping[OccId, float],
        *,
        normalize: bool = False,
    ) -> "ShareTable":
        """Validate and renormalize a raw share mapping.

        Raw sums within ``RAW_SUM_TOL`` of one are silently rescaled to
        remove float dust; larger deviations require ``normalize=True``.
        """
        if not shares:
            raise ValidationError(f"{source_label}: empty share table")
        level = _infer_level(shares, source_label)
        total = float(sum(shares.values()))
        if total <= 0:
            raise ValidationError(f"{source_label}: total share mass is {total!r}")
        if abs(total - 1.0) > RAW_SUM_TOL and not normalize:
            raise ValidationError(
                f"{source_label}: raw shares sum to {total!r}; "
                "pass normalize=True (--normalize) to rescale"
            )
        # Rescale only when needed: already-canonical tables round-trip
        # bit for bit.
        if abs(total - 1.0) > POST_SUM_TOL:
            entries = {occ: s / total for occ, s in sorted(shares.items())}
        else:
            entries = dict(sorted(shares.items()))
        return ShareTable(source_label, entries, level)


@dataclass(frozen=True)
class OccOutcomeTable:
    """One outcome value and one positive employment weight per occupation."""

    label: str
    values: Mapping[OccId, float]
    weights: Mapping[OccId, float]

    def __post_init__(self) -> None:
        if not self.values:
            raise ValidationError(f"{self.label}: empty outcome table")
        if set(self.values) != set(self.weights):
            raise ValidationError(f"{self.label}: value/weight occupations differ")
        for occ, w in self.weights.items():
            if w <= 0:
                raise ValidationError(f"{self.label}: non-positive weight for {occ}")

    @property
    def level(self) -> str:
        return _infer_level(self.values, self.label)

    def occupations(self) -> list[OccId]:
        return sorted(self.values)


@dataclass(frozen=True)
class TaskBundle:
    """Per-occupation task rows: ids, workforce and platform shares, scores."""

    task_ids: tuple[str, ...]
    q: np.ndarray
    q_p: np.ndarray
    tau: np.ndarray


@dataclass(frozen=True)
class TaskMatrix:
    """Occupation-by-task shares and task capability scores.

    Within each occupation the workforce task-time shares ``q`` and the
    platform task shares ``q_p`` each sum to one; capability scores ``tau``
    lie in [0, 1].
    """

    source_label: str
    bundles: Mapping[OccId, TaskBundle]

    def __post_init__(self) -> None:
        for occ, b in self.bundles.items():
            if len(b.task_ids) == 0:
                raise ValidationError(f"{self.source_label}: {occ} has no task rows")
            if np.any(b.q < 0) or np.any(b.q_p < 0):
                raise ValidationError(f"{self.source_label}: negative task share for {occ}")
            if np.any(b.tau < 0) or np.any(b.tau > 1):
                raise ValidationError(f"{self.source_label}: tau outside [0,1] for {occ}")
            for name, arr in (("q", b.q), ("q_p", b.q_p)):
                if abs(float(arr.sum()) - 1.0) > POST_SUM_TOL:
                    raise ValidationError(
                        f"{self.source_label}: {name} for {occ} sums to {float(arr.sum())!r}"
                    )

    def occupations(self) -> list[OccId]:
        return sorted(self.bundles)

    @staticmethod
    def from_rows(
        source_label: str,
        rows: Iterable[tuple[OccId, str, float, float, float]],
        *,
        normalize: bool = False,
    ) -> "TaskMatrix":
        grouped: dict[OccId, list[tuple[str, float, float, float]]] = {}
        for occ, task_id, q, q_p, tau in rows:
            grouped.setdefault(occ, []).append((task_id, q, q_p, tau))
        bundles = {}
        for occ, items in grouped.items():
            items.sort()
            ids = tuple(t for t, _, _, _ in items)
            if len(set(ids)) != len(ids):
                raise ValidationError(f"{source_label}: duplicate task id for {occ}")
            q = np.array([v for _, v, _, _ in items], dtype=float)
            q_p = np.array([v for _, _, v, _ in items], dtype=float)
            tau = np.array([v for _, _, _, v in items], dtype=float)
            for name, arr in (("q", q), ("q_p", q_p)):
                total = float(arr.sum())
                if total <= 0:
                    raise ValidationError(f"{source_label}: zero {name} mass for {occ}")
                if abs(total - 1.0) > RAW_SUM_TOL and not normalize:
                    raise ValidationError(
                        f"{source_label}: {name} for {occ} sums to {total!r}; "
                        "pass normalize=True (--normalize) to rescale"
                    )
                if abs(total - 1.0) > POST_SUM_TOL:
                    arr /= total
            bundles[occ] = TaskBundle(ids, q, q_p, tau)
        return TaskMatrix(source_label, bundles)


@dataclass(frozen=True)
class Crosswalk:
    """Source-code to target-occupation allocation weights.

    Weights for a fixed source code are nonnegative and sum to one.
    """

    entries: Mapping[str, tuple[tuple[OccId, float], ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for source, targets in self.entries.items():
            total = 0.0
            for occ, w in targets:
                if w < 0:
                    raise ValidationError(f"crosswalk: negative weight for {source}")
                total += w
            if abs(total - 1.0) > RAW_SUM_TOL:
                raise ValidationError(
                    f"crosswalk: weights for source {source} sum to {total!r}"
                )


# ---------------------------------------------------------------------------
# Loading


def load_share_table(
    path: str | Path,
    source_label: str,
    *,
    percent: bool = False,
    normalize: bool = False,
) -> ShareTable:
    """Load a ``occ_code,share`` CSV.

    ``percent`` divides raw values by 100 before validation; the internal
    representation is always a fraction. The table level is inferred from
    the code length.
    """
    rows = _read_rows(path, ("occ_code", "share"))
    shares: dict[OccId, float] = {}
    for row in rows:
        occ = OccId(row["occ_code"])
        if occ in shares:
            raise ValidationError(f"{path}: duplicate occupation {occ}")
        value = _parse_float(row["share"], path, "share")
        shares[occ] = value / 100.0 if percent else value
    return ShareTable.from_shares(source_label, shares, normalize=normalize)


def load_task_matrix(
    path: str | Path, source_label: str, *, normalize: bool = False
) -> TaskMatrix:
    rows = _read_rows(path, ("occ_code", "task_id", "q", "q_p", "tau"))
    parsed = [
        (
            OccId(row["occ_code"]),
            row["task_id"],
            _parse_float(row["q"], path, "q"),
            _parse_float(row["q_p"], path, "q_p"),
            _parse_float(row["tau"], path, "tau"),
        )
        for row in rows
    ]
    return TaskMatrix.from_rows(source_label, parsed, normalize=normalize)


def load_outcome_table(path: str | Path, label: str) -> OccOutcomeTable:
    rows = _read_rows(path, ("occ_code", "outcome", "weight"))
    values: dict[OccId, float] = {}
    weights: dict[OccId, float] = {}
    for row in rows:
        occ = OccId(row["occ_code"])
        if occ in values:
            raise ValidationError(f"{path}: duplicate occupation {occ}")
        values[occ] = _parse_float(row["outcome"], path, "outcome")
        weights[occ] = _parse_float(row["weight"], path, "weight")
    return OccOutcomeTable(label, values, weights)


def load_crosswalk(path: str | Path) -> Crosswalk:
    rows = _read_rows(path, ("source_code", "target_code", "weight"))
    grouped: dict[str, list[tuple[OccId, float]]] = {}
    for row in rows:
        grouped.setdefault(row["source_code"], []).append(
            (OccId(row["target_code"]), _parse_float(row["weight"], path, "weight"))
        )
    return Crosswalk({src: tuple(sorted(t)) for src, t in sorted(grouped.items())})


# ---------------------------------------------------------------------------
# Writing


def share_table_csv(table: ShareTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["occ_code", "share"])
    for occ in table.occupations():
        writer.writerow([occ.code, _fmt(table.entries[occ])])
    return buf.getvalue()


def task_matrix_csv(matrix: TaskMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["occ_code", "task_id", "q", "q_p", "tau"])
    for occ in matrix.occupations():
        b = matrix.bundles[occ]
        for i, task_id in enumerate(b.task_ids):
            writer.writerow(
                [occ.code, task_id, _fmt(b.q[i]), _fmt(b.q_p[i]), _fmt(b.tau[i])]
            )
    return buf.getvalue()


def outcome_table_csv(table: OccOutcomeTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["occ_code", "outcome", "weight"])
    for occ in table.occupations():
        writer.writerow([occ.code, _fmt(table.values[occ]), _fmt(table.weights[occ])])
    return buf.getvalue()


def write_text(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Reshaping


def _major(occ: OccId) -> OccId:
    return OccId(occ.major_group)


def expand_major_to_detailed(
    major_table: ShareTable | OccOutcomeTable,
    reference_weights: OccOutcomeTable,
):
    """Expand a major-group table to the detailed level.

    Share tables split each parent share across its detailed occupations
    in proportion to the reference employment weights. Score-type outcome
    tables copy the parent value to every detailed occupation. Detailed
    inputs are returned unchanged.
    """
    if reference_weights.level != LEVEL_DETAILED:
        raise ValidationError("reference weights must be at the detailed level")
    detailed = reference_weights.occupations()
    by_major: dict[str, list[OccId]] = {}
    for occ in detailed:
        by_major.setdefault(occ.major_group, []).append(occ)

    if isinstance(major_table, ShareTable):
        if major_table.level == LEVEL_DETAILED:
            return major_table
        shares: dict[OccId, float] = {}
        for parent, share in major_table.entries.items():
            children = by_major.get(parent.code)
            if not children:
                raise ValidationError(f"no detailed occupations under {parent}")
            group_weight = sum(reference_weights.weights[c] for c in children)
            for child in children:
                shares[child] = share * reference_weights.weights[child] / group_weight
        missing = [o for o in detailed if OccId(o.major_group) not in major_table.entries]
        if missing:
            extra = "" if len(missing) == 1 else f" (+{len(missing) - 1} more)"
            raise ValidationError(
                f"detailed occupation with no parent entry: {missing[0]}{extra}"
            )
        return ShareTable(
            major_table.source_label,
            dict(sorted(shares.items())),
            LEVEL_DETAILED,
            normalized=major_table.normalized,
        )

    if isinstance(major_table, OccOutcomeTable):
        if major_table.level == LEVEL_DETAILED:
            return major_table
        values: dict[OccId, float] = {}
        weights: dict[OccId, float] = {}
        for occ in detailed:
            parent = _major(occ)
            if parent not in major_table.values:
                raise ValidationError(f"detailed occupation with no parent entry: {occ}")
            values[occ] = major_table.values[parent]
            weights[occ] = reference_weights.weights[occ]
        return OccOutcomeTable(major_table.label, values, weights)

    raise TypeError(f"cannot expand {type(major_table).__name__}")


def collapse_to_major(table: ShareTable) -> ShareTable:
    """Aggregate a detailed share table to major groups by summation."""
    if table.level == LEVEL_MAJOR:
        return table
    shares: dict[OccId, float] = {}
    for occ, share in table.entries.items():
        parent = _major(occ)
        shares[parent] = shares.get(parent, 0.0) + share
    return ShareTable(
        table.source_label,
        dict(sorted(shares.items())),
        LEVEL_MAJOR,
        normalized=table.normalized,
    )


@dataclass(frozen=True)
class CrosswalkResult:
    table: ShareTable
    coverage: float
    unmatched: tuple[str, ...]


def apply_crosswalk(table: ShareTable, xw: Crosswalk) -> CrosswalkResult:
    """Map a share table onto target codes via allocation weights.

    Matched share mass is conserved exactly; unmatched source codes are
    reported through the coverage fraction (matched mass over total mass)
    rather than raised.
    """
    target_shares: dict[OccId, float] = {}
    matched_mass = 0.0
    unmatched: list[str] = []
    for occ in table.occupations():
        share = table.entries[occ]
        targets = xw.entries.get(occ.code)
        if targets is None:
            unmatched.append(occ.code)
            continue
        matched_mass += share
        for target, weight in targets:
            target_shares[target] = target_shares.get(target, 0.0) + share * weight
    total = table.total()
    coverage = matched_mass / total if total > 0 else 0.0
    level = _infer_level(target_shares, "crosswalk output") if target_shares else table.level
    out = ShareTable(
        table.source_label,
        dict(sorted(target_shares.items())),
        level,
        normalized=abs(matched_mass - 1.0) <= POST_SUM_TOL,
    )
    return CrosswalkResult(out, coverage, tuple(unmatched))
