"""Feature importance scoring and top-percent selection.

A feature's importance is the Euclidean norm of its row in the learned
transformation matrix: rows the row-sparsity penalty drove to zero mark
features the model does not use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import ensure_matrix, row_norms


@dataclass(frozen=True)
class FeatureRanking:
    """Per-feature scores plus the feature order sorted by descending
    score, ties broken by ascending feature index."""

    scores: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        if self.scores.ndim != 1 or self.order.shape != self.scores.shape:
            raise ValueError("scores and order must be 1-D and equally long")
        if np.any(self.scores < 0):
            raise ValueError("scores must be nonnegative")


def score_features(transform) -> FeatureRanking:
    """Rank features by the row norms of a transformation matrix."""
    transform = ensure_matrix(transform, "transform")
    scores = row_norms(transform)
    # stable argsort keeps the original (ascending) index order for ties
    order = np.argsort(-scores, kind="stable")
    return FeatureRanking(scores=scores, order=order)


def select_top(ranking: FeatureRanking, p: float) -> np.ndarray:
    """Indices of the top p percent of features, rounded up.

    Selections are nested: a larger p always contains the selection of a
    smaller p, because both are prefixes of the same ranking.
    """
    if not 0 < p <= 100:
        raise ValueError(f"p must be in (0, 100], got {p}")
    d = ranking.scores.size
    exact = p * d / 100.0
    nearest = round(exact)
    # products like 10 * 64 / 100 can land a hair above an integer; do not
    # let that round the count up
    count = int(nearest) if abs(exact - nearest) < 1e-9 else math.ceil(exact)
    count = max(count, 1)
    return ranking.order[:count].copy()
