"""Seeded random streams.

Every sampling API takes a seed. Streams come from the counter-based Philox
generator so that a (seed, spawn index) pair always yields the same numbers,
independent of platform or thread scheduling.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Return a Philox-backed generator; ``seed`` may already be a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed is required for every sampling operation")
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def spawn(seed, count: int) -> list[np.random.Generator]:
    """Independent child streams, e.g. one per repetition of an experiment."""
    if isinstance(seed, np.random.Generator):
        children = seed.bit_generator.seed_seq.spawn(count)
    else:
        children = np.random.SeedSequence(int(seed)).spawn(count)
    return [np.random.Generator(np.random.Philox(c)) for c in children]
