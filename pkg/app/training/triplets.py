"""Triplet generation for a mini-batch.

``generate_triplets`` enumerates every ordered (I1, I2, I3) of the batch with
SharedLabels(I1, I2) > SharedLabels(I1, I3); ``sample_category_triplets``
draws (I, I+, I-) with I and I+ in category j and I- outside it.
"""
from __future__ import annotations

import numpy as np

from app.numerics.rng import SeededRng


def shared_label_matrix(labels: np.ndarray) -> np.ndarray:
    Y = np.asarray(labels, dtype=np.int64)
    return Y @ Y.T


def generate_triplets(labels: np.ndarray, cap: int | None = None, rng: SeededRng | None = None) -> np.ndarray:
    """(T, 3) batch indices in lexicographic order; uniformly subsampled to ``cap`` when larger."""
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.shape[0] == 0:
        raise ValueError("generate_triplets needs a nonempty (batch, c) label matrix")
    S = shared_label_matrix(labels)
    triples = np.argwhere(S[:, :, None] > S[:, None, :])
    if cap is not None and len(triples) > cap:
        if rng is None:
            raise ValueError("a seeded rng is required to subsample triplets")
        keep = np.sort(rng.choice(len(triples), size=cap, replace=False))
        triples = triples[keep]
    return triples


def sample_category_triplets(labels: np.ndarray, j: int, count: int, rng: SeededRng) -> np.ndarray:
    """(count, 3) batch indices, or an empty (0, 3) array when category j cannot form a triple."""
    column = np.asarray(labels)[:, j]
    positives = np.flatnonzero(column == 1)
    negatives = np.flatnonzero(column == 0)
    if len(positives) < 2 or len(negatives) < 1:
        return np.zeros((0, 3), dtype=np.int64)
    out = np.empty((count, 3), dtype=np.int64)
    for t in range(count):
        a, p = rng.choice(len(positives), size=2, replace=False)
        n = rng.integers(0, len(negatives))
        out[t] = (positives[a], positives[p], negatives[n])
    return out
