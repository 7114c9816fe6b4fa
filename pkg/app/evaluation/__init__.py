"""Ranking metrics, evaluation protocols and the metric report."""
from app.evaluation.metrics import (
    RankedRelevance,
    acg_at,
    average_precision,
    label_auc,
    mean_over_queries,
    ndcg_at,
    weighted_map,
)
from app.evaluation.protocol import (
    MetricRow,
    evaluate_all,
    evaluate_category_aware,
    evaluate_label_auc,
    evaluate_random_control,
    evaluate_semantic,
)
from app.evaluation.report import format_report, read_report, report_values, write_report

__all__ = [
    "MetricRow",
    "RankedRelevance",
    "acg_at",
    "average_precision",
    "evaluate_all",
    "evaluate_category_aware",
    "evaluate_label_auc",
    "evaluate_random_control",
    "evaluate_semantic",
    "format_report",
    "label_auc",
    "mean_over_queries",
    "ndcg_at",
    "read_report",
    "report_values",
    "weighted_map",
    "write_report",
]
