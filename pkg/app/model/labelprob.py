"""Label probability calculation.

Per-proposal logits M (N x c) are max-pooled across proposals into image
scores m, turned into an image-level distribution p by a softmax and trained
with a cross entropy against the normalized label vector. A row-wise softmax
of M gives the per-proposal probability matrix P used by cross-proposal
fusion.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.core.errors import ShapeError, ValidationFailure
from app.numerics.kernels import as_matrix


@dataclass(frozen=True)
class PooledScores:
    m: np.ndarray
    argmax_rows: np.ndarray


def cross_hypothesis_maxpool(M) -> PooledScores:
    M = as_matrix(M, "M")
    if M.shape[0] == 0:
        raise ShapeError("cross-hypothesis max-pooling needs at least one proposal")
    rows = M.argmax(axis=0)  # first maximum: smallest row index
    return PooledScores(m=M[rows, np.arange(M.shape[1])], argmax_rows=rows)


def maxpool_backward(grad_m: np.ndarray, pooled: PooledScores, num_rows: int) -> np.ndarray:
    dM = np.zeros((num_rows, grad_m.shape[0]))
    dM[pooled.argmax_rows, np.arange(grad_m.shape[0])] = grad_m
    return dM


def softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = v - v.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def image_probability(pooled: PooledScores | np.ndarray) -> np.ndarray:
    m = pooled.m if isinstance(pooled, PooledScores) else np.asarray(pooled, dtype=np.float64)
    return softmax(m)


def classification_loss(p: np.ndarray, Y: np.ndarray) -> Tuple[float, np.ndarray]:
    """Cross entropy against Y/|c+| and its gradient with respect to the pooled scores m."""
    p = np.asarray(p, dtype=np.float64)
    Y = np.asarray(Y)
    if p.shape != Y.shape:
        raise ShapeError(f"p has shape {p.shape}, Y has shape {Y.shape}")
    positives = int(Y.sum())
    if positives < 1:
        raise ValidationFailure("classification loss is undefined for an empty label set")
    target = (Y == 1).astype(np.float64) / positives
    mask = Y == 1
    loss = -float(np.sum(np.log(p[mask]))) / positives
    return loss, p - target


def proposal_probabilities(M) -> np.ndarray:
    return softmax(as_matrix(M, "M"), axis=1)


def proposal_probabilities_backward(dP: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Row-wise softmax Jacobian applied to dP."""
    return P * (dP - np.sum(dP * P, axis=1, keepdims=True))
