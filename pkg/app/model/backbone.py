"""Convolution stack and spatial pyramid pooling.

The stack is conv3x3 -> ReLU -> conv3x3 -> ReLU -> maxpool 2x2 (stride 1,
zero padding 1 for both convolutions). SPP maps a normalized box to the
feature-map cell range ``[floor(L1*w), max(lo+1, ceil(L3*w)))`` (same
vertically), splits it into g x g bins per level and max-pools every bin.
Output order is level-major, bin row-major, channel-minor.
"""
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.errors import ShapeError, ValidationFailure
from app.numerics.kernels import ReLULayer, check_finite

KERNEL = 3


@dataclass
class ConvCache:
    cols: np.ndarray
    wmat: np.ndarray
    in_shape: Tuple[int, int, int]


def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, ConvCache]:
    cin, H, W = x.shape
    if w.ndim != 4 or w.shape[1] != cin or w.shape[2:] != (KERNEL, KERNEL):
        raise ShapeError(f"conv weight {w.shape} does not fit input {x.shape}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"conv bias {b.shape} does not fit weight {w.shape}")
    cout = w.shape[0]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(xp, (KERNEL, KERNEL), axis=(1, 2))  # cin, H, W, 3, 3
    cols = np.ascontiguousarray(windows.transpose(1, 2, 0, 3, 4)).reshape(H * W, cin * KERNEL * KERNEL)
    wmat = w.reshape(cout, -1).T
    out = cols @ wmat + b
    return out.T.reshape(cout, H, W), ConvCache(cols=cols, wmat=wmat, in_shape=(cin, H, W))


def conv3x3_backward(dout: np.ndarray, cache: ConvCache) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    cin, H, W = cache.in_shape
    cout = dout.shape[0]
    dflat = dout.reshape(cout, H * W).T
    dw = (cache.cols.T @ dflat).T.reshape(cout, cin, KERNEL, KERNEL)
    db = dflat.sum(axis=0)
    dcols = (dflat @ cache.wmat.T).reshape(H, W, cin, KERNEL, KERNEL)
    dxp = np.zeros((cin, H + 2, W + 2))
    for ki in range(KERNEL):
        for kj in range(KERNEL):
            dxp[:, ki:ki + H, kj:kj + W] += dcols[:, :, :, ki, kj].transpose(2, 0, 1)
    return dxp[:, 1:-1, 1:-1], dw, db


@dataclass
class PoolCache:
    argmax: np.ndarray
    in_shape: Tuple[int, int, int]


def maxpool2x2_forward(x: np.ndarray) -> Tuple[np.ndarray, PoolCache]:
    C, H, W = x.shape
    H2, W2 = H // 2, W // 2
    if H2 == 0 or W2 == 0:
        raise ShapeError(f"feature map {x.shape} is too small for 2x2 pooling")
    blocks = x[:, :2 * H2, :2 * W2].reshape(C, H2, 2, W2, 2).transpose(0, 1, 3, 2, 4).reshape(C, H2, W2, 4)
    # ties go to the lowest row-major index in the window
    argmax = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
    return out, PoolCache(argmax=argmax, in_shape=(C, H, W))


def maxpool2x2_backward(dout: np.ndarray, cache: PoolCache) -> np.ndarray:
    C, H, W = cache.in_shape
    H2, W2 = dout.shape[1:]
    blocks = np.zeros((C, H2, W2, 4))
    np.put_along_axis(blocks, cache.argmax[..., None], dout[..., None], axis=-1)
    dx = np.zeros((C, H, W))
    dx[:, :2 * H2, :2 * W2] = blocks.reshape(C, H2, W2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(C, 2 * H2, 2 * W2)
    return dx


@dataclass
class ConvStackCache:
    conv1: ConvCache
    relu1: ReLULayer
    conv2: ConvCache
    relu2: ReLULayer
    pool: PoolCache


def feature_map_size(height: int, width: int) -> Tuple[int, int]:
    return height // 2, width // 2


def conv_stack_forward(image: np.ndarray, w1, b1, w2, b2) -> Tuple[np.ndarray, ConvStackCache]:
    """Shared feature map of one image, shape (channels, H//2, W//2)."""
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError(f"image must be (channels, H, W), got {x.shape}")
    if x.shape[1] < 2 or x.shape[2] < 2:
        raise ShapeError(f"image {x.shape} is smaller than the 2x2 pooling window")
    check_finite(x, "image")
    z1, c1 = conv3x3_forward(x, w1, b1)
    r1 = ReLULayer()
    a1 = r1.forward(z1)
    z2, c2 = conv3x3_forward(a1, w2, b2)
    r2 = ReLULayer()
    a2 = r2.forward(z2)
    fm, pc = maxpool2x2_forward(a2)
    return fm, ConvStackCache(conv1=c1, relu1=r1, conv2=c2, relu2=r2, pool=pc)


def conv_stack_backward(dfm: np.ndarray, cache: ConvStackCache) -> Dict[str, np.ndarray]:
    da2 = maxpool2x2_backward(dfm, cache.pool)
    dz2 = cache.relu2.backward(da2)
    da1, dw2, db2 = conv3x3_backward(dz2, cache.conv2)
    dz1 = cache.relu1.backward(da1)
    _, dw1, db1 = conv3x3_backward(dz1, cache.conv1)
    return {"conv1.W": dw1, "conv1.b": db1, "conv2.W": dw2, "conv2.b": db2}


def spp_dim(channels: int, levels: Sequence[int]) -> int:
    return channels * sum(g * g for g in levels)


def box_cell_range(L: Sequence[float], h: int, w: int) -> Tuple[int, int, int, int]:
    x_lo = min(int(math.floor(L[0] * w)), w - 1)
    y_lo = min(int(math.floor(L[1] * h)), h - 1)
    x_hi = min(max(x_lo + 1, int(math.ceil(L[2] * w))), w)
    y_hi = min(max(y_lo + 1, int(math.ceil(L[3] * h))), h)
    return y_lo, y_hi, x_lo, x_hi


def _split(lo: int, n: int, g: int, k: int) -> Tuple[int, int]:
    # nonempty even split: [floor(k n / g), ceil((k+1) n / g))
    return lo + (k * n) // g, lo + -((-(k + 1) * n) // g)


def spp_pool(fm: np.ndarray, L: Sequence[float], levels: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """Pool one box. Returns the d-vector and, per entry, the flat spatial index of its argmax cell."""
    check_finite(fm, "feature map")
    L = [float(v) for v in L]
    if not (0.0 <= L[0] < L[2] <= 1.0 and 0.0 <= L[1] < L[3] <= 1.0):
        raise ValidationFailure(f"normalized box {L} is not a valid box")
    C, h, w = fm.shape
    y_lo, y_hi, x_lo, x_hi = box_cell_range(L, h, w)
    ny, nx = y_hi - y_lo, x_hi - x_lo
    values: List[np.ndarray] = []
    where: List[np.ndarray] = []
    channels = np.arange(C)
    for g in levels:
        for by in range(g):
            r0, r1 = _split(y_lo, ny, g, by)
            for bx in range(g):
                c0, c1 = _split(x_lo, nx, g, bx)
                region = fm[:, r0:r1, c0:c1].reshape(C, -1)
                a = region.argmax(axis=1)
                values.append(region[channels, a])
                where.append((r0 + a // (c1 - c0)) * w + (c0 + a % (c1 - c0)))
    return np.concatenate(values), np.concatenate(where)


def spp_backward(dvec: np.ndarray, argmax_cells: np.ndarray, fm_shape: Tuple[int, int, int]) -> np.ndarray:
    """Route gradients of one or more pooled vectors back to their argmax cells."""
    C, h, w = fm_shape
    dvec = np.atleast_2d(dvec)
    cells = np.atleast_2d(argmax_cells)
    channel = np.broadcast_to(np.arange(dvec.shape[1]) % C, dvec.shape)
    dfm = np.zeros((C, h * w))
    np.add.at(dfm, (channel.ravel(), cells.ravel()), dvec.ravel())
    return dfm.reshape(C, h, w)


@dataclass
class EncodeCache:
    conv: ConvStackCache
    fm_shape: Tuple[int, int, int]
    argmax_cells: np.ndarray  # (N, d)


def encode_proposals(image: np.ndarray, boxes: np.ndarray, w1, b1, w2, b2,
                     levels: Sequence[int]) -> Tuple[np.ndarray, EncodeCache]:
    """The N x d matrix D; the conv stack runs once per image."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if boxes.shape[0] == 0:
        raise ValidationFailure("at least one proposal is required")
    fm, conv_cache = conv_stack_forward(image, w1, b1, w2, b2)
    rows, cells = zip(*(spp_pool(fm, L, levels) for L in boxes))
    return np.stack(rows), EncodeCache(conv=conv_cache, fm_shape=fm.shape, argmax_cells=np.stack(cells))


def encode_proposals_backward(dD: np.ndarray, cache: EncodeCache) -> Dict[str, np.ndarray]:
    dfm = spp_backward(dD, cache.argmax_cells, cache.fm_shape)
    return conv_stack_backward(dfm, cache.conv)
