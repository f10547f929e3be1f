"""Hierarchical O(N) frame-pair sampling.

Level 0 holds every consecutive pair; level l >= 1 holds pairs with gap 2^l
whose lower index is a multiple of 2^(l-1). The union over levels up to
floor(log2(N-1)) gives short-range density plus dyadic long-range coverage,
so every frame is reachable from frame 0 through sampled pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import TooFewFrames


@dataclass(frozen=True)
class FramePairSet:
    """Ordered, duplicate-free set of sampled frame pairs (i < j)."""

    n_frames: int
    pairs: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def sample_pairs(n_frames: int) -> FramePairSet:
    """Sample the hierarchical pair set for a video of n_frames frames.

    Pairs are normalized to i < j, deduplicated, and sorted by (gap, i) so
    downstream shuffles start from a canonical order.

    Args:
        n_frames: Number of frames; must be >= 2.

    Returns:
        The sampled FramePairSet.

    Raises:
        TooFewFrames: If n_frames < 2.
    """
    if n_frames < 2:
        raise TooFewFrames(f"need at least 2 frames, got {n_frames}")
    pairs = {(i, i + 1) for i in range(n_frames - 1)}
    max_level = int(math.floor(math.log2(n_frames - 1)))
    for level in range(1, max_level + 1):
        gap = 2**level
        modulus = 2 ** (level - 1)
        for i in range(0, n_frames - gap):
            if i % modulus == 0:
                pairs.add((i, i + gap))
    ordered = sorted(pairs, key=lambda p: (p[1] - p[0], p[0]))
    return FramePairSet(n_frames=n_frames, pairs=ordered)
