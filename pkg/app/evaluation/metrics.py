"""Ranking-quality metrics over multi-label relevance.

``r[j]`` is the number of labels the j-th ranked database image shares with
the query. ``n_pos`` counts the database images sharing at least one label,
over the whole database rather than the returned list.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import ShapeError, ValidationFailure


@dataclass(frozen=True)
class RankedRelevance:
    r: np.ndarray
    n_pos: int
    ideal: Optional[np.ndarray] = None  # relevance multiset of the whole database

    @staticmethod
    def build(r: Sequence[int], n_pos: Optional[int] = None,
              ideal: Optional[Sequence[int]] = None) -> "RankedRelevance":
        r_arr = np.asarray(r, dtype=np.int64)
        if r_arr.ndim != 1:
            raise ShapeError(f"relevance must be one-dimensional, got shape {r_arr.shape}")
        if (r_arr < 0).any():
            raise ValidationFailure("relevance values must be nonnegative")
        ideal_arr = None if ideal is None else np.asarray(ideal, dtype=np.int64)
        if n_pos is None:
            source = r_arr if ideal_arr is None else ideal_arr
            n_pos = int(np.count_nonzero(source))
        if n_pos < int(np.count_nonzero(r_arr)):
            raise ValidationFailure(f"n_pos={n_pos} is smaller than the relevant items in the ranking")
        return RankedRelevance(r=r_arr, n_pos=int(n_pos), ideal=ideal_arr)

    def ideal_order(self) -> np.ndarray:
        source = self.r if self.ideal is None else self.ideal
        return np.sort(source)[::-1]


def _check_depth(rel: RankedRelevance, m: int) -> None:
    if not 1 <= m <= rel.r.size:
        raise ValidationFailure(f"depth m={m} outside 1..{rel.r.size}")


def dcg_at(r: np.ndarray, m: int) -> float:
    top = np.asarray(r[:m], dtype=np.float64)
    discounts = np.log2(np.arange(2, top.size + 2))
    return float(np.sum((np.power(2.0, top) - 1.0) / discounts))


def ndcg_at(rel: RankedRelevance, m: int) -> float:
    _check_depth(rel, m)
    z = dcg_at(rel.ideal_order(), m)
    if z == 0:
        return 0.0
    return dcg_at(rel.r, m) / z


def acg_at(rel: RankedRelevance, m: int) -> float:
    _check_depth(rel, m)
    return float(np.sum(rel.r[:m])) / m


def average_precision(rel: RankedRelevance) -> Optional[float]:
    """Precision at every relevant position summed over the list, divided by n_pos.

    Returns None when the query has no relevant database item; such queries
    are excluded from means.
    """
    if rel.n_pos == 0:
        return None
    pos = rel.r > 0
    if not pos.any():
        return 0.0
    hits = np.cumsum(pos)
    precision = hits / np.arange(1, rel.r.size + 1)
    return float(np.sum(precision[pos])) / rel.n_pos


def weighted_map(rel: RankedRelevance) -> Optional[float]:
    """ACG at every relevant position summed over the list, divided by n_pos."""
    if rel.n_pos == 0:
        return None
    pos = rel.r > 0
    if not pos.any():
        return 0.0
    acg = np.cumsum(rel.r) / np.arange(1, rel.r.size + 1)
    return float(np.sum(acg[pos])) / rel.n_pos


def mean_over_queries(values: Iterable[Optional[float]]) -> Tuple[float, int, int]:
    """(mean of the defined values, number averaged, number excluded as undefined)."""
    kept: List[float] = []
    excluded = 0
    for v in values:
        if v is None:
            excluded += 1
        else:
            kept.append(v)
    mean = float(np.mean(kept)) if kept else 0.0
    return mean, len(kept), excluded


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts
    return ((starts + 1 + ends) / 2.0)[inverse]


def label_auc(scores: np.ndarray, labels: np.ndarray) -> List[Optional[float]]:
    """Per-label ROC AUC by the rank-sum statistic; None for a label lacking positives or negatives."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise ShapeError(f"scores {scores.shape} and labels {labels.shape} must be equal (n, c) arrays")
    out: List[Optional[float]] = []
    for j in range(scores.shape[1]):
        positive = labels[:, j] == 1
        n_pos = int(positive.sum())
        n_neg = positive.size - n_pos
        if n_pos == 0 or n_neg == 0:
            out.append(None)
            continue
        ranks = average_ranks(scores[:, j])
        u = float(ranks[positive].sum()) - n_pos * (n_pos + 1) / 2.0
        out.append(u / (n_pos * n_neg))
    return out
