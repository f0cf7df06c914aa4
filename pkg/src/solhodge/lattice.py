"""Integer lattice enumeration and multi-index combinatorics.

Modes are integer frequency vectors m in Z^n; multi-indices are strictly
increasing tuples of leaf axes in 1..k that label wedge factors of leafwise
forms.  Everything here is exact integer arithmetic.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DegenerateWedge

# Enumerated balls are cached; they are immutable and reused heavily.
_BALL_CACHE: dict[tuple[int, float], np.ndarray] = {}
_BALL_CACHE_MAX = 8


def enumerate_ball(n: int, radius: float) -> np.ndarray:
    """All modes m in Z^n with Euclidean norm ||m|| <= radius.

    Returns an (M, n) int64 array, ordered by (||m||^2, lexicographic) so
    results are reproducible bit for bit.  The origin is always included
    and the returned array is read-only.
    """
    if n < 1:
        raise ValueError("ambient dimension must be >= 1")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    key = (n, float(radius) ** 2)
    cached = _BALL_CACHE.get(key)
    if cached is not None:
        return cached

    nmax = int(math.floor(radius))
    axis = np.arange(-nmax, nmax + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    norm_sq = (pts * pts).sum(axis=1)
    keep = norm_sq <= float(radius) ** 2
    pts, norm_sq = pts[keep], norm_sq[keep]
    order = np.lexsort(tuple(pts[:, i] for i in range(n - 1, -1, -1)) + (norm_sq,))
    out = pts[order]
    out.setflags(write=False)

    if len(_BALL_CACHE) >= _BALL_CACHE_MAX:
        _BALL_CACHE.pop(next(iter(_BALL_CACHE)))
    _BALL_CACHE[key] = out
    return out


def validate_multi_index(indices: Sequence[int], k: int) -> tuple[int, ...]:
    """Check that ``indices`` is strictly increasing with values in 1..k."""
    idx = tuple(int(i) for i in indices)
    if any(i < 1 or i > k for i in idx):
        raise ValueError(f"multi-index entries must lie in 1..{k}: {idx}")
    if any(a >= b for a, b in zip(idx, idx[1:])):
        raise ValueError(f"multi-index must be strictly increasing: {idx}")
    return idx


@lru_cache(maxsize=None)
def multi_indices(k: int, p: int) -> tuple[tuple[int, ...], ...]:
    """All strictly increasing p-element subsets of 1..k, in lexicographic order."""
    if not 0 <= p <= k:
        raise ValueError(f"degree {p} outside 0..{k}")
    return tuple(itertools.combinations(range(1, k + 1), p))


def insertion_sign(j: int, indices: Sequence[int]) -> int:
    """Sign s with e_j ^ e_J = s * e_{J union {j}} (sorted).

    Equals (-1)^(number of elements of J smaller than j).  Raises
    DegenerateWedge when j already occurs in J.
    """
    idx = tuple(indices)
    if j in idx:
        raise DegenerateWedge(f"axis {j} already present in {idx}")
    below = sum(1 for i in idx if i < j)
    return -1 if below % 2 else 1


def complement_sign(indices: Sequence[int], k: int) -> int:
    """Sign of the permutation sending (1..k) to (J, complement of J), each sorted."""
    idx = sorted(int(i) for i in indices)
    if any(i < 1 or i > k for i in idx):
        raise ValueError(f"multi-index entries must lie in 1..{k}: {idx}")
    inversions = sum(j - pos - 1 for pos, j in enumerate(idx))
    return -1 if inversions % 2 else 1


def complement(indices: Sequence[int], k: int) -> tuple[int, ...]:
    """The sorted complement of J inside 1..k."""
    present = set(indices)
    return tuple(i for i in range(1, k + 1) if i not in present)
