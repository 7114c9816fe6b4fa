"""Hash coding: cross-proposal fusion, binarization and the triplet losses."""
from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.core.errors import ShapeError, ValidationFailure
from app.numerics.kernels import AffineLayer


def cross_proposal_fusion(P: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Instance-aware representation f (c x b): f[j] = (1/N) sum_i P[i, j] * H[i]."""
    P = np.asarray(P, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    if P.ndim != 2 or H.ndim != 2 or P.shape[0] != H.shape[0]:
        raise ShapeError(f"fusion needs P and H with the same number of rows, got {P.shape} and {H.shape}")
    return (P.T @ H) / P.shape[0]


def cross_proposal_fusion_backward(df: np.ndarray, P: np.ndarray, H: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    N = P.shape[0]
    dP = (H @ df.T) / N
    dH = (P @ df) / N
    return dP, dH


def binarize(x) -> np.ndarray:
    """1 where the value is strictly positive, else 0."""
    return (np.asarray(x) > 0).astype(np.uint8)


@dataclass(frozen=True)
class TripletResult:
    loss: float
    grad_a: np.ndarray
    grad_pos: np.ndarray
    grad_neg: np.ndarray

    def scaled(self, w: float) -> "TripletResult":
        return TripletResult(self.loss * w, self.grad_a * w, self.grad_pos * w, self.grad_neg * w)


def triplet_loss(a, pos, neg, margin: float = 1.0) -> TripletResult:
    a = np.asarray(a, dtype=np.float64)
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if not (a.shape == pos.shape == neg.shape):
        raise ShapeError(f"triplet members differ in shape: {a.shape}, {pos.shape}, {neg.shape}")
    slack = margin - float(np.sum((a - neg) ** 2)) + float(np.sum((a - pos) ** 2))
    if slack <= 0:
        zero = np.zeros_like(a)
        return TripletResult(0.0, zero, zero.copy(), zero.copy())
    return TripletResult(slack, 2.0 * (neg - pos), 2.0 * (pos - a), 2.0 * (a - neg))


def category_triplet_loss(fI, fIpos, fIneg, j: int, margin: float = 1.0) -> TripletResult:
    """Triplet loss on group j of three instance-aware representations; other groups get zero gradient."""
    fI = np.asarray(fI, dtype=np.float64)
    if not 0 <= j < fI.shape[0]:
        raise ValidationFailure(f"category {j} outside 0..{fI.shape[0] - 1}")
    res = triplet_loss(fI[j], np.asarray(fIpos)[j], np.asarray(fIneg)[j], margin)
    grads = []
    for g in (res.grad_a, res.grad_pos, res.grad_neg):
        full = np.zeros_like(fI)
        full[j] = g
        grads.append(full)
    return TripletResult(res.loss, *grads)


def semantic_project(f, W_s: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """s = flatten(f) W_s + bias, with f flattened group-major."""
    flat = np.asarray(f, dtype=np.float64).reshape(1, -1)
    if W_s.shape[0] != flat.shape[1]:
        raise ShapeError(f"semantic weight {W_s.shape} does not fit a representation of {flat.shape[1]} values")
    return AffineLayer().forward(flat, W_s, bias)[0]


def semantic_project_backward(
    ds: np.ndarray, f: np.ndarray, W_s: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    layer = AffineLayer()
    layer.forward(np.asarray(f, dtype=np.float64).reshape(1, -1), W_s, np.zeros(W_s.shape[1]))
    dflat, dW, db = layer.backward(np.asarray(ds).reshape(1, -1))
    return dflat.reshape(np.shape(f)), dW, db


def triplet_weight(sim_pos: int, sim_neg: int) -> float:
    return float(2 ** sim_pos - 2 ** sim_neg)


def weighted_triplet_loss(sI, sIpos, sIneg, sim_pos: int, sim_neg: int, margin: float = 1.0) -> TripletResult:
    if sim_pos <= sim_neg:
        raise ValidationFailure(f"invalid triple: sim(I, I+)={sim_pos} must exceed sim(I, I-)={sim_neg}")
    return triplet_loss(sI, sIpos, sIneg, margin).scaled(triplet_weight(sim_pos, sim_neg))


def shared_labels(Y1, Y2) -> int:
    Y1 = np.asarray(Y1)
    Y2 = np.asarray(Y2)
    if Y1.shape != Y2.shape:
        raise ShapeError(f"label vectors differ in length: {Y1.shape} vs {Y2.shape}")
    return int(np.sum(Y1.astype(np.int64) * Y2.astype(np.int64)))


@dataclass(frozen=True)
class CodeBundle:
    """Codes of one image: c category codes of b bits, p, and an optional q-bit semantic code."""
    image_id: int
    category_codes: np.ndarray  # uint8 (c, b)
    p: np.ndarray
    semantic_code: Optional[np.ndarray] = None  # uint8 (q,)

    @property
    def categories(self) -> int:
        return int(self.category_codes.shape[0])

    @property
    def bits(self) -> int:
        return int(self.category_codes.shape[1])

    @property
    def semantic_bits(self) -> int:
        return 0 if self.semantic_code is None else int(self.semantic_code.shape[0])
