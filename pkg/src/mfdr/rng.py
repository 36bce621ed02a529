"""Seeded random substreams keyed by integer paths.

A stream is fully determined by ``(seed, *keys)``, so jobs can run in any
order or concurrently and still draw identical numbers.
"""

import numpy as np


def substream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit integer seed for the substream at ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint32) @ np.array([1 << 31, 1], dtype=np.uint64))
