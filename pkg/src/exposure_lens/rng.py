"""Seeded random generators for reproducible simulation.

Every stochastic routine in the package draws from a Philox counter-based
bit generator keyed by an integer seed plus an optional stream path (for
example a replicate index), so identical configurations produce identical
draws on every platform and under any execution order of replicates.
"""

from __future__ import annotations

import os

import numpy as np

ENV_SEED = "EXPOSURE_LENS_SEED"
_DEFAULT_SEED = 20240501


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a generator keyed by ``(seed, *stream)``.

    Distinct stream paths give statistically independent streams; the same
    path always reproduces the same draws.
    """
    ss = np.random.SeedSequence((int(seed),) + tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def default_seed() -> int:
    """Seed from the ``EXPOSURE_LENS_SEED`` environment variable, if set."""
    raw = os.environ.get(ENV_SEED)
    if raw is None:
        return _DEFAULT_SEED
    return int(raw)
