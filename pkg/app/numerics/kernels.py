"""Dense float64 kernels with paired forward/backward passes.

Layers are stateless with respect to parameters: ``forward`` takes the
parameters explicitly and caches only what ``backward`` needs, so one layer
object serves exactly one forward/backward pair.
"""
from __future__ import annotations
from typing import Tuple

import numpy as np

from app.core.errors import ShapeError, ValidationFailure


def check_finite(x: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ValidationFailure(f"{name} contains NaN or Inf")
    return x


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    return check_finite(m, name)


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: A is {a.shape}, B is {b.shape}")
    return a @ b


class AffineLayer:
    """Y = X·W + bias, bias broadcast over rows."""

    def __init__(self) -> None:
        self._x: np.ndarray | None = None
        self._w: np.ndarray | None = None

    def forward(self, x: np.ndarray, w: np.ndarray, bias: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
            raise ShapeError(f"affine shape mismatch: X is {x.shape}, W is {w.shape}")
        if bias.shape != (w.shape[1],):
            raise ShapeError(f"affine bias must have shape ({w.shape[1]},), got {bias.shape}")
        self._x = x
        self._w = w
        return x @ w + bias

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._x is None:
            raise RuntimeError("backward called before forward")
        dx = dy @ self._w.T
        dw = self._x.T @ dy
        dbias = dy.sum(axis=0)
        return dx, dw, dbias


class ReLULayer:
    def __init__(self) -> None:
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise RuntimeError("backward called before forward")
        # subgradient at exactly 0 is 0
        return np.where(self._mask, dy, 0.0)


def affine_layer(x, w, bias) -> np.ndarray:
    return AffineLayer().forward(x, np.asarray(w, dtype=np.float64), np.asarray(bias, dtype=np.float64))


def relu_layer(x) -> np.ndarray:
    return ReLULayer().forward(x)
