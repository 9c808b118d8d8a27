"""Counter-based random streams.

Every simulation draws from a Philox generator keyed by ``(master_seed, *path)``
through :class:`numpy.random.SeedSequence`, so replicate ``r`` of a run always
sees the same stream no matter which worker executes it or in which order.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigError

Seed = int | Sequence[int]


def normalize_seed(seed: Seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    out = tuple(int(s) for s in seed)
    if not out:
        raise ConfigError("empty seed")
    return out


def stream(seed: Seed) -> np.random.Generator:
    """Generator for ``seed = master`` or ``seed = (master, key1, key2, ...)``."""
    master, *path = normalize_seed(seed)
    if master < 0 or any(k < 0 for k in path):
        raise ConfigError("seeds must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master, spawn_key=tuple(path))))


def derive(master_seed: int, *keys: int) -> tuple[int, ...]:
    """Seed for a sub-stream, e.g. ``derive(master, replicate)``."""
    return (int(master_seed), *(int(k) for k in keys))
