"""Pair sampling against a brute-force enumeration oracle."""

import math

import pytest

from steadydepth.errors import TooFewFrames
from steadydepth.pairing import sample_pairs


def brute_force_pairs(n: int) -> set:
    """Direct enumeration of the level union, independent of sample_pairs."""
    pairs = set()
    top = int(math.floor(math.log2(n - 1)))
    for level in range(top + 1):
        gap = 2**level
        modulus = 1 if level == 0 else 2 ** (level - 1)
        for i in range(n):
            for j in range(n):
                if abs(i - j) == gap and min(i, j) % modulus == 0:
                    pairs.add((min(i, j), max(i, j)))
    return pairs


def test_two_frames():
    assert sample_pairs(2).pairs == [(0, 1)]


def test_five_frames_exact_set():
    got = sample_pairs(5)
    assert got.pairs == [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2), (1, 3), (2, 4), (0, 4)]
    assert len(got) == 8


def test_nine_frames_count():
    # levels: gap1 -> 8, gap2 -> 7, gap4 even i -> 3, gap8 -> 1
    assert len(sample_pairs(9)) == 8 + 7 + 3 + 1


def test_too_few_frames():
    with pytest.raises(TooFewFrames):
        sample_pairs(1)


def test_matches_brute_force_small():
    for n in range(2, 130):
        assert set(sample_pairs(n).pairs) == brute_force_pairs(n)


def test_no_duplicates_and_ordering():
    ps = sample_pairs(64)
    assert len(set(ps.pairs)) == len(ps.pairs)
    keys = [(j - i, i) for i, j in ps.pairs]
    assert keys == sorted(keys)
    assert all(i < j for i, j in ps.pairs)


def test_level0_completeness():
    for n in (2, 3, 17, 100):
        got = set(sample_pairs(n).pairs)
        assert all((i, i + 1) in got for i in range(n - 1))


def test_dyadic_reachability():
    # every frame must connect to frame 0 through sampled pairs
    for n in (2, 9, 33, 257):
        adj = {f: set() for f in range(n)}
        for i, j in sample_pairs(n):
            adj[i].add(j)
            adj[j].add(i)
        seen = {0}
        stack = [0]
        while stack:
            f = stack.pop()
            for g in adj[f]:
                if g not in seen:
                    seen.add(g)
                    stack.append(g)
        assert len(seen) == n


def test_linear_growth_three_n():
    # the union of dyadic levels stays under 3N
    for n in range(2, 1025):
        assert len(sample_pairs(n)) < 3 * n
