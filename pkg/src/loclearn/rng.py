"""Seeded random streams.

Every experiment seed is split into independent child streams, one per stage,
so that e.g. the partition offsets do not shift when the pool size changes.
A stream is ``numpy.random.Generator(PCG64(SeedSequence([seed, stage_id])))``
with the fixed stage ids below.
"""

import numpy as np

STAGES = {
    "partition": 0,
    "pool": 1,
    "eval": 2,
    "oracle": 3,
    "nw-sample": 4,
    "kde": 5,
    "dataset": 6,
    "audit": 7,
}


def stream(seed, stage):
    """Generator for ``stage`` of experiment ``seed``."""
    if stage not in STAGES:
        raise KeyError(f"unknown rng stage {stage!r}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), STAGES[stage]])))


def as_generator(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
