"""Deterministic substream derivation for Monte Carlo runs."""

from __future__ import annotations

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for a named substream of a root seed.

    Streams are keyed by ``(seed, path)`` through ``SeedSequence`` spawn
    keys, so trial i always sees the same stream regardless of execution
    order or how many other streams were drawn first.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=path))
