"""SOC-2018 occupation code handling.

Codes are either detailed (six digits, e.g. ``151252``) or major-group
(two digits, e.g. ``15``). The first two digits of a detailed code are its
major group and must belong to the 2018 major-group list embedded below.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError

# SOC 2018 major groups, including Military Specific (55).
MAJOR_GROUPS = (
    "11", "13", "15", "17", "19", "21", "23", "25", "27", "29", "31", "33",
    "35", "37", "39", "41", "43", "45", "47", "49", "51", "53", "55",
)

_MAJOR_SET = frozenset(MAJOR_GROUPS)

LEVEL_DETAILED = "detailed"
LEVEL_MAJOR = "major_group"


@dataclass(frozen=True, order=True)
class OccId:
    """An occupation code at either the detailed or major-group level."""

    code: str

    def __post_init__(self) -> None:
        code = self.code
        if not code.isdigit() or len(code) not in (2, 6):
            raise ValidationError(
                f"malformed occupation code {code!r}: expected 2 or 6 digits"
            )
        if code[:2] not in _MAJOR_SET:
            raise ValidationError(
                f"occupation code {code!r} has unknown major group {code[:2]!r}"
            )

    @property
    def major_group(self) -> str:
        return self.code[:2]

    @property
    def level(self) -> str:
        return LEVEL_DETAILED if len(self.code) == 6 else LEVEL_MAJOR

    def __str__(self) -> str:
        return self.code
