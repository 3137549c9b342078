"""Labeled random streams derived from a single root seed."""

import zlib

import numpy as np


def _key(label):
    if isinstance(label, (int, np.integer)):
        return int(label)
    return zlib.crc32(str(label).encode())


def seed_sequence(seed, *labels):
    """``SeedSequence`` for ``seed`` and a path of labels, e.g. ``(seed, "chain", "z")``.

    The same seed and labels always give the same stream, and streams with
    different label paths are statistically independent.
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + tuple(_key(l) for l in labels))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key(l) for l in labels))


def stream(seed, *labels):
    return np.random.default_rng(seed_sequence(seed, *labels))
