"""Acquisition scoring and batch selection: the rank-weighted margin plus
entropy, top-2 margin, least-confidence, and random baselines."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .core import RngStream
from .data import PoolState

# scorer orientation: which extreme of the score marks the most useful
# (most uncertain) samples to label next
SELECT_SMALLEST = "smallest"
SELECT_LARGEST = "largest"


def _check_probs(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D probability vector, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError(f"need at least 2 classes, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("probability vector contains non-finite entries")
    if np.any(arr < 0.0):
        raise ValueError(f"probability vector has negative entries: min {arr.min()}")
    total = float(arr.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probability vector sums to {total!r}, not 1")
    return arr


def score_rankedms(p) -> float:
    """Rank-weighted margin: sum of consecutive sorted-probability gaps, each
    divided by its rank. 1 for a one-hot prediction, 0 for uniform; low scores
    mark uncertain predictions, so acquisition takes the smallest."""
    q = np.sort(_check_probs(p))[::-1]
    gaps = q[:-1] - q[1:]
    ranks = np.arange(1, q.shape[0], dtype=np.float64)
    return float((gaps / ranks).sum())


def score_entropy(p) -> float:
    """Shannon entropy (natural log, 0*log0 = 0); high scores mark uncertain
    predictions, so acquisition takes the largest."""
    q = np.sort(_check_probs(p))[::-1]
    nz = q[q > 0.0]
    return float(-(nz * np.log(nz)).sum())


def score_margin(p) -> float:
    """Gap between the two highest probabilities; acquisition takes the smallest."""
    q = np.sort(_check_probs(p))[::-1]
    return float(q[0] - q[1])


def score_least_confidence(p) -> float:
    """Top probability alone; acquisition takes the smallest."""
    q = _check_probs(p)
    return float(q.max())


@dataclass(frozen=True)
class ScoredCandidate:
    pool_index: int
    score: float

    def __post_init__(self):
        object.__setattr__(self, "pool_index", int(self.pool_index))
        object.__setattr__(self, "score", float(self.score))
        if not math.isfinite(self.score):
            raise ValueError(f"candidate {self.pool_index} has non-finite score")
        if self.pool_index < 0:
            raise ValueError(f"pool index must be non-negative, got {self.pool_index}")


def select_batch(scores, b: int, direction: str) -> list[int]:
    """The b most extreme candidates' pool indices, extreme-first, ties broken
    by ascending pool index."""
    b = int(b)
    if not 0 <= b <= len(scores):
        raise ValueError(f"budget {b} exceeds {len(scores)} candidates")
    if direction == SELECT_SMALLEST:
        key = lambda c: (c.score, c.pool_index)
    elif direction == SELECT_LARGEST:
        key = lambda c: (-c.score, c.pool_index)
    else:
        raise ValueError(f"direction must be 'smallest' or 'largest', got {direction!r}")
    return [c.pool_index for c in heapq.nsmallest(b, scores, key=key)]


def select_random(pool: PoolState, b: int, rng: RngStream) -> list[int]:
    """A uniform subset of b unlabeled indices, without replacement."""
    b = int(b)
    if not 0 <= b <= len(pool.unlabeled):
        raise ValueError(f"budget {b} exceeds {len(pool.unlabeled)} unlabeled samples")
    picks = rng.gen.choice(len(pool.unlabeled), size=b, replace=False)
    return [pool.unlabeled[int(k)] for k in picks]


def apply_selection(pool: PoolState, selected) -> PoolState:
    """Move the selected indices from unlabeled to labeled (appended in order)."""
    selected = [int(i) for i in selected]
    if len(set(selected)) != len(selected):
        raise ValueError("selection contains duplicate indices")
    unlabeled_set = set(pool.unlabeled)
    missing = [i for i in selected if i not in unlabeled_set]
    if missing:
        raise ValueError(f"selected indices not in the unlabeled pool: {missing[:5]}")
    chosen = set(selected)
    updated = PoolState(
        pool.labeled + tuple(selected),
        tuple(i for i in pool.unlabeled if i not in chosen),
    )
    assert updated.total == pool.total
    return updated
