"""Seed plumbing.

Every experiment takes one integer master seed. Sub-streams are keyed by
integer tuples (epsilon index, candidate index, trial index, ...) through
`numpy.random.SeedSequence` spawn keys, so a stream depends only on its key and
never on how work was scheduled.
"""
from __future__ import annotations

import numpy as np

__all__ = ["as_seed_sequence", "stream", "seed_of"]


def as_seed_sequence(seed) -> np.random.SeedSequence:
    """Normalize an int, SeedSequence or Generator into a SeedSequence.

    A Generator is consumed once (one 63-bit draw) to produce the entropy.
    """
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.SeedSequence(int(seed))


def stream(seed, *key: int) -> np.random.Generator:
    """Independent generator for sub-task `key` under master `seed`."""
    base = as_seed_sequence(seed)
    ss = np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def seed_of(seed) -> int:
    """Integer entropy recorded in reports."""
    return int(as_seed_sequence(seed).entropy)
