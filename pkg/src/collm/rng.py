"""Deterministic random number generation.

All stochastic steps (weight init, batch shuffling, dropout masks, the
synthetic data generator) draw from numpy ``Generator`` objects seeded
through this module. PCG64 is the underlying algorithm: a documented,
seedable 64-bit generator whose streams are identical across platforms,
so a fixed seed gives bitwise-identical draws everywhere.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Return a fresh PCG64 generator for ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child generators from one master seed.

    Children are spawned through ``SeedSequence``, so the i-th stream is a
    pure function of ``(seed, i)`` and distinct streams never overlap.
    Used to keep weight init, shuffling and dropout on separate streams,
    and to give data-parallel workers per-thread generators.
    """
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]
