"""Pinned PRNG construction.

Reproducibility across runs and platforms is part of the contract, so the
generator algorithm is fixed here (PCG64) instead of relying on numpy's
default, and derived streams go through SeedSequence spawning.
"""

from __future__ import annotations

import numpy as np


def pinned_rng(seed) -> np.random.Generator:
    """Generator backed by PCG64; ``seed`` may be an int or a SeedSequence."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn(seed: int, k: int) -> list[np.random.SeedSequence]:
    """Derive ``k`` independent child seed sequences from one integer seed."""
    return np.random.SeedSequence(seed).spawn(k)


def tagged_spawn(seed: int, tag: int, k: int) -> list[np.random.SeedSequence]:
    """Child streams disjoint from spawn(seed, ...) for any other tag."""
    return np.random.SeedSequence([seed, tag]).spawn(k)
