"""Seeded, splittable randomness: Philox streams keyed by (seed, *path)."""

import numpy as np


def generator(seed: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.Philox(ss))
