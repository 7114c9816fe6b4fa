"""Flat category-aware baseline.

Shares the convolution stack, global-average-pools the feature map and maps it
with one affine layer to c*b values split into c groups. It has no proposal
or label probability path, so its bundles carry a uniform p and no semantic
code.

The pooled vector is standardized per channel with a mean and scale fitted on
the training split before the first step (``fit_feature_scaling``); training
never steps those two tensors.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from app.core.errors import ValidationFailure
from app.model.backbone import ConvStackCache, conv_stack_backward, conv_stack_forward
from app.model.hashcode import CodeBundle, binarize
from app.model.params import KIND_FLAT, ModelParams
from app.numerics.kernels import AffineLayer
from app.synthdata.types import Scene

log = logging.getLogger(__name__)

MIN_SCALE = 1e-4


@dataclass
class FlatForwardPass:
    pooled: np.ndarray
    z: np.ndarray
    f: np.ndarray
    conv: ConvStackCache
    fm_shape: tuple
    layer: AffineLayer


class FlatBaseline:
    def __init__(self, params: ModelParams):
        if params.shapes.kind != KIND_FLAT:
            raise ValueError(f"expected a flat baseline checkpoint, got kind '{params.shapes.kind}'")
        self.params = params
        self.shapes = params.shapes

    def pool(self, pixels: np.ndarray):
        p = self.params
        fm, conv = conv_stack_forward(pixels, p["conv1.W"], p["conv1.b"], p["conv2.W"], p["conv2.b"])
        return fm.mean(axis=(1, 2)), fm.shape, conv

    def forward(self, pixels: np.ndarray, boxes: Optional[np.ndarray] = None) -> FlatForwardPass:
        p = self.params
        pooled, fm_shape, conv = self.pool(pixels)
        z = (pooled - p["flat.mean"]) / p["flat.scale"]
        layer = AffineLayer()
        out = layer.forward(z[None, :], p["flat.W"], p["flat.b"])[0]
        f = out.reshape(self.shapes.categories, self.shapes.bits)
        return FlatForwardPass(pooled=pooled, z=z, f=f, conv=conv, fm_shape=fm_shape, layer=layer)

    def backward(self, fp: FlatForwardPass, grad_f: np.ndarray) -> Dict[str, np.ndarray]:
        p = self.params
        dz, dW, db = fp.layer.backward(np.asarray(grad_f, dtype=np.float64).reshape(1, -1))
        dz = dz[0]
        dpooled = dz / p["flat.scale"]
        C, h, w = fp.fm_shape
        dfm = np.broadcast_to(dpooled[:, None, None] / (h * w), (C, h, w)).copy()
        grads = conv_stack_backward(dfm, fp.conv)
        grads["flat.mean"] = -dpooled
        grads["flat.scale"] = -dz * fp.z / p["flat.scale"]
        grads["flat.W"] = dW
        grads["flat.b"] = db
        return grads

    def fit_feature_scaling(self, scenes: Sequence[Scene]) -> None:
        """Set ``flat.mean`` and ``flat.scale`` to the pooled-feature statistics of ``scenes``."""
        if not scenes:
            raise ValidationFailure("feature scaling needs at least one scene")
        pooled = np.stack([self.pool(s.pixels)[0] for s in scenes])
        self.params.tensors["flat.mean"] = pooled.mean(axis=0)
        self.params.tensors["flat.scale"] = np.maximum(pooled.std(axis=0), MIN_SCALE)
        log.info("Fitted baseline feature scaling on %d scenes (min scale %.3g)", len(scenes),
                 float(self.params["flat.scale"].min()), extra={"stage": "TRAIN_BASELINE"})

    def encode(self, scene: Scene) -> CodeBundle:
        fp = self.forward(scene.pixels)
        c = self.shapes.categories
        return CodeBundle(image_id=scene.id, category_codes=binarize(fp.f), p=np.full(c, 1.0 / c))
