"""Seed handling and reproducible substreams.

Every stochastic entry point takes an explicit seed; independence between
policies, purposes and Monte Carlo blocks comes from keyed ``SeedSequence``
spawning, never from draw order.
"""

from __future__ import annotations

from typing import Union

import numpy as np

Seed = Union[int, np.random.SeedSequence, np.random.Generator]


def coerce_rng(seed: Seed) -> np.random.Generator:
    """Accept an int, a SeedSequence or a ready Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def substream(seed: Seed, *key: int) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *key)``.

    Streams with distinct keys never overlap, so changing how one purpose
    consumes randomness cannot disturb any other purpose.  A SeedSequence
    seed keeps its own spawn key as a prefix, so nested keying composes.
    """
    if isinstance(seed, np.random.Generator):
        raise TypeError("substreams must be derived from a seed, not a live generator")
    if isinstance(seed, np.random.SeedSequence):
        entropy = seed.entropy
        key = tuple(seed.spawn_key) + key
    else:
        entropy = int(seed)
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=tuple(key)))
