"""Instance-aware hashing network: one image through backbone, label probability and hash coding."""
from __future__ import annotations
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from app.model.backbone import EncodeCache, encode_proposals, encode_proposals_backward
from app.model.baseline import FlatBaseline
from app.model.hashcode import (
    CodeBundle,
    binarize,
    cross_proposal_fusion,
    cross_proposal_fusion_backward,
    semantic_project,
    semantic_project_backward,
)
from app.model.labelprob import (
    PooledScores,
    cross_hypothesis_maxpool,
    image_probability,
    maxpool_backward,
    proposal_probabilities,
    proposal_probabilities_backward,
)
from app.model.params import KIND_FLAT, KIND_INSTANCE, ModelParams
from app.numerics.kernels import AffineLayer
from app.synthdata.types import Scene


@dataclass
class ForwardPass:
    """Everything one image's forward pass produced, kept for backward."""
    D: np.ndarray
    M: np.ndarray
    pooled: PooledScores
    p: np.ndarray
    P: np.ndarray
    H: np.ndarray
    f: np.ndarray
    s: Optional[np.ndarray]
    encode: EncodeCache
    cls_layer: AffineLayer
    hash_layer: AffineLayer


class InstanceAwareNet:
    def __init__(self, params: ModelParams):
        if params.shapes.kind != KIND_INSTANCE:
            raise ValueError(f"expected an instance-aware checkpoint, got kind '{params.shapes.kind}'")
        self.params = params
        self.shapes = params.shapes

    def forward(self, pixels: np.ndarray, boxes: np.ndarray) -> ForwardPass:
        p = self.params
        D, enc = encode_proposals(pixels, boxes, p["conv1.W"], p["conv1.b"], p["conv2.W"], p["conv2.b"],
                                  self.shapes.levels)
        cls_layer = AffineLayer()
        M = cls_layer.forward(D, p["cls.W"], p["cls.b"])
        pooled = cross_hypothesis_maxpool(M)
        hash_layer = AffineLayer()
        H = hash_layer.forward(D, p["hash.W"], p["hash.b"])
        P = proposal_probabilities(M)
        f = cross_proposal_fusion(P, H)
        s = semantic_project(f, p["sem.W"], p["sem.b"]) if self.shapes.semantic_bits else None
        return ForwardPass(D=D, M=M, pooled=pooled, p=image_probability(pooled), P=P, H=H, f=f, s=s,
                           encode=enc, cls_layer=cls_layer, hash_layer=hash_layer)

    def backward(
        self,
        fp: ForwardPass,
        grad_m: Optional[np.ndarray] = None,
        grad_f: Optional[np.ndarray] = None,
        grad_s: Optional[np.ndarray] = None,
    ) -> Dict[str, np.ndarray]:
        """Parameter gradients given upstream gradients on m, f and s (any may be None)."""
        grads: Dict[str, np.ndarray] = {}
        df = np.zeros_like(fp.f) if grad_f is None else np.array(grad_f, dtype=np.float64)
        if grad_s is not None and fp.s is not None:
            df_s, grads["sem.W"], grads["sem.b"] = semantic_project_backward(grad_s, fp.f, self.params["sem.W"])
            df = df + df_s
        dP, dH = cross_proposal_fusion_backward(df, fp.P, fp.H)
        dM = proposal_probabilities_backward(dP, fp.P)
        if grad_m is not None:
            dM = dM + maxpool_backward(np.asarray(grad_m, dtype=np.float64), fp.pooled, fp.M.shape[0])
        dD_cls, grads["cls.W"], grads["cls.b"] = fp.cls_layer.backward(dM)
        dD_hash, grads["hash.W"], grads["hash.b"] = fp.hash_layer.backward(dH)
        grads.update(encode_proposals_backward(dD_cls + dD_hash, fp.encode))
        return grads

    def encode(self, scene: Scene) -> CodeBundle:
        fp = self.forward(scene.pixels, scene.boxes_normalized())
        return CodeBundle(
            image_id=scene.id,
            category_codes=binarize(fp.f),
            p=fp.p,
            semantic_code=None if fp.s is None else binarize(fp.s),
        )


def build_model(params: ModelParams):
    """The network a checkpoint describes: instance-aware or flat baseline."""
    return FlatBaseline(params) if params.shapes.kind == KIND_FLAT else InstanceAwareNet(params)


def encode_image(scene: Scene, model) -> CodeBundle:
    """Encode one scene with either an instance-aware network or the flat baseline."""
    return model.encode(scene)
