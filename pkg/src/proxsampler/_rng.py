"""Seeded random streams.

Every parallel unit of work (a block of chains, a chunk of Monte Carlo
draws) gets its own generator derived from the root seed and an integer
path. The derivation is a hash of ``(root, *path)`` through numpy's
``SeedSequence``, so the stream for block ``i`` is the same whichever
worker runs it and however many workers there are.
"""
from __future__ import annotations

import numpy as np

# Purpose tags keep streams for different jobs of the same run disjoint.
TAG_SAMPLER = 1
TAG_RGO = 2
TAG_TAIL = 3
TAG_METRIC = 4
TAG_BASELINE = 5
TAG_TRUTH = 6


def stream(root: int, *path: int) -> np.random.Generator:
    """Return the generator for ``mix(root, *path)``."""
    if root < 0:
        raise ValueError("root seed must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(root), *map(int, path)])))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Split ``total`` items into fixed-size chunks (the last may be short)."""
    if total <= 0:
        return []
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])
