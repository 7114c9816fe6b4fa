"""Evaluation protocols over encoded query and database splits.

Relevance between two images is the number of labels they share. Semantic
queries rank the whole database; category-aware queries rank one hash table.
Query order is ascending image id.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from app.core.errors import ValidationFailure
from app.evaluation.metrics import (
    RankedRelevance,
    acg_at,
    average_precision,
    label_auc,
    mean_over_queries,
    ndcg_at,
    weighted_map,
)
from app.model.hashcode import CodeBundle
from app.numerics.rng import SeededRng
from app.retrieval.hamming import hamming_distances, pack_bits
from app.retrieval.index import DEFAULT_THRESHOLD, build_index, rank_table

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricRow:
    metric: str
    bits: int
    value: float
    num_queries: int


def _sorted(bundles: Sequence[CodeBundle]) -> List[CodeBundle]:
    return sorted(bundles, key=lambda b: b.image_id)


def truth_matrix(bundles: Sequence[CodeBundle], truth: Mapping[int, np.ndarray]) -> np.ndarray:
    rows = []
    for bundle in bundles:
        if bundle.image_id not in truth:
            raise ValidationFailure(f"no ground-truth labels for image {bundle.image_id}")
        rows.append(np.asarray(truth[bundle.image_id], dtype=np.int64))
    return np.stack(rows)


def _full_rankings(query_codes: np.ndarray, db_codes: np.ndarray, db_ids: np.ndarray) -> np.ndarray:
    """Row i holds database positions ordered by (distance to query i, image id)."""
    db_words = pack_bits(db_codes)
    q_words = pack_bits(query_codes)
    orders = np.empty((len(query_codes), len(db_ids)), dtype=np.int64)
    for i in range(len(query_codes)):
        orders[i] = np.lexsort((db_ids, hamming_distances(q_words[i], db_words)))
    return orders


def _graded_metrics(relevance: np.ndarray, orders: np.ndarray, depths: Sequence[int], bits: int,
                    prefix: str = "") -> List[MetricRow]:
    n_db = relevance.shape[1]
    ndcg: Dict[int, List[float]] = {m: [] for m in depths}
    acg: Dict[int, List[float]] = {m: [] for m in depths}
    aps: List[Optional[float]] = []
    waps: List[Optional[float]] = []
    for i in range(relevance.shape[0]):
        rel = RankedRelevance.build(relevance[i, orders[i]], ideal=relevance[i])
        for m in depths:
            depth = min(m, n_db)
            ndcg[m].append(ndcg_at(rel, depth))
            acg[m].append(acg_at(rel, depth))
        aps.append(average_precision(rel))
        waps.append(weighted_map(rel))
    rows = []
    n_q = relevance.shape[0]
    for m in depths:
        rows.append(MetricRow(f"{prefix}ndcg@{m}", bits, float(np.mean(ndcg[m])), n_q))
    for m in depths:
        rows.append(MetricRow(f"{prefix}acg@{m}", bits, float(np.mean(acg[m])), n_q))
    map_mean, map_n, excluded = mean_over_queries(aps)
    wmap_mean, wmap_n, _ = mean_over_queries(waps)
    rows.append(MetricRow(f"{prefix}map", bits, map_mean, map_n))
    rows.append(MetricRow(f"{prefix}wmap", bits, wmap_mean, wmap_n))
    rows.append(MetricRow(f"{prefix}excluded_queries", bits, float(excluded), n_q))
    return rows


def evaluate_semantic(queries: Sequence[CodeBundle], database: Sequence[CodeBundle],
                      truth: Mapping[int, np.ndarray], depths: Sequence[int]) -> List[MetricRow]:
    """NDCG@m and ACG@m at every depth, MAP and Weighted MAP of semantic Hamming ranking."""
    queries, database = _sorted(queries), _sorted(database)
    if any(b.semantic_code is None for b in list(queries) + list(database)):
        raise ValidationFailure("semantic evaluation needs a semantic code on every bundle")
    bits = queries[0].semantic_bits
    db_ids = np.array([b.image_id for b in database], dtype=np.int64)
    orders = _full_rankings(np.stack([b.semantic_code for b in queries]),
                            np.stack([b.semantic_code for b in database]), db_ids)
    relevance = truth_matrix(queries, truth) @ truth_matrix(database, truth).T
    return _graded_metrics(relevance, orders, depths, bits)


def evaluate_random_control(queries: Sequence[CodeBundle], database: Sequence[CodeBundle],
                            truth: Mapping[int, np.ndarray], depths: Sequence[int], bits: int,
                            rng: SeededRng) -> List[MetricRow]:
    """The semantic metrics for seeded uniformly random codes of the given length."""
    queries, database = _sorted(queries), _sorted(database)
    db_ids = np.array([b.image_id for b in database], dtype=np.int64)
    q_codes = rng.child("query").integers(0, 2, size=(len(queries), bits)).astype(np.uint8)
    db_codes = rng.child("database").integers(0, 2, size=(len(database), bits)).astype(np.uint8)
    orders = _full_rankings(q_codes, db_codes, db_ids)
    relevance = truth_matrix(queries, truth) @ truth_matrix(database, truth).T
    return _graded_metrics(relevance, orders, depths, bits, prefix="random_")


def evaluate_category_aware(queries: Sequence[CodeBundle], database: Sequence[CodeBundle],
                            truth: Mapping[int, np.ndarray],
                            threshold: float = DEFAULT_THRESHOLD) -> List[MetricRow]:
    """Per-category MAP through the grouped index.

    For category j the queries are the query images whose labels contain j;
    each searches hash table j with its j-th code, so only database images
    filed under j (p_j at least the threshold) are ranked. Relevant means
    "contains j", and n_pos counts every such database image, filed or not.
    """
    queries, database = _sorted(queries), _sorted(database)
    c, b = queries[0].categories, queries[0].bits
    index = build_index(database, threshold=threshold)
    q_truth = truth_matrix(queries, truth)
    db_truth = dict(zip((x.image_id for x in database), truth_matrix(database, truth)))
    rows = []
    per_category = []
    for j in range(c):
        members = np.flatnonzero(q_truth[:, j] == 1)
        if members.size == 0:
            log.warning("No query image contains category %d", j, extra={"stage": "EVALUATE"})
            rows.append(MetricRow(f"category_map:{j}", b, 0.0, 0))
            continue
        n_pos = sum(int(labels[j] == 1) for labels in db_truth.values())
        aps = []
        for i in members:
            ranking = rank_table(index, j, queries[i].category_codes[j])
            relevant = [int(db_truth[image_id][j] == 1) for image_id, _ in ranking]
            aps.append(average_precision(RankedRelevance.build(relevant, n_pos=n_pos)))
        value, n, _ = mean_over_queries(aps)
        rows.append(MetricRow(f"category_map:{j}", b, value, n))
        if n:
            per_category.append(value)
    mean = float(np.mean(per_category)) if per_category else 0.0
    rows.append(MetricRow("category_map_mean", b, mean, len(per_category)))
    return rows


def evaluate_label_auc(queries: Sequence[CodeBundle], truth: Mapping[int, np.ndarray]) -> List[MetricRow]:
    """Per-label classification AUC of the image probabilities p over the query split."""
    queries = _sorted(queries)
    labels = truth_matrix(queries, truth)
    aucs = label_auc(np.stack([q.p for q in queries]), labels)
    rows = []
    for j, value in enumerate(aucs):
        rows.append(MetricRow(f"auc:{j}", 0, 0.0 if value is None else value,
                              0 if value is None else len(queries)))
    mean, n, _ = mean_over_queries(aucs)
    rows.append(MetricRow("auc_mean", 0, mean, n))
    return rows


def evaluate_all(queries: Sequence[CodeBundle], database: Sequence[CodeBundle],
                 truth: Mapping[int, np.ndarray], depths: Sequence[int], random_control: bool = True,
                 seed: int = 0, threshold: float = DEFAULT_THRESHOLD) -> List[MetricRow]:
    """Every protocol that applies to the given bundles, in a fixed order."""
    if not queries or not database:
        raise ValidationFailure("evaluation needs nonempty query and database code sets")
    rows: List[MetricRow] = []
    semantic = all(b.semantic_code is not None for b in list(queries) + list(database))
    if semantic:
        rows += evaluate_semantic(queries, database, truth, depths)
    rows += evaluate_category_aware(queries, database, truth, threshold)
    if random_control:
        bits = queries[0].semantic_bits if semantic else queries[0].bits
        rows += evaluate_random_control(queries, database, truth, depths, bits,
                                        SeededRng(seed).child("random-control"))
    rows += evaluate_label_auc(queries, truth)
    return rows
