"""Exception hierarchy shared across the package.

Validation failures map to CLI exit code 2, numerical failures to exit
code 3.
"""


class ExposureLensError(Exception):
    """Base class for all package errors."""


class ValidationError(ExposureLensError, ValueError):
    """Malformed input: bad codes, broken invariants, schema violations."""


class ZeroPlatformError(ValidationError):
    """Reweighting requested for occupations with zero platform share."""

    def __init__(self, occupations):
        self.occupations = sorted(occupations)
        codes = ", ".join(o.code for o in self.occupations[:10])
        more = "" if len(self.occupations) <= 10 else f" (+{len(self.occupations) - 10} more)"
        super().__init__(
            f"cannot reweight occupations with zero platform share: {codes}{more}"
        )


class NumericalError(ExposureLensError, RuntimeError):
    """Numerical failure: non-convergence, collinearity, degenerate variance."""


class ConvergenceError(NumericalError):
    """Iterative routine failed to reach tolerance within its sweep cap."""
