"""Learnable tensors of the instance-aware network and the flat baseline."""
from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

import numpy as np

from app.core.config import RunConfig
from app.core.errors import CheckpointError
from app.numerics.rng import SeededRng

KIND_INSTANCE = "instance"
KIND_FLAT = "flat"

# per-channel standardization of the pooled baseline features, fitted once, never stepped
FIXED_TENSORS = frozenset({"flat.mean", "flat.scale"})


@dataclass(frozen=True)
class ModelShapes:
    kind: str
    categories: int
    in_channels: int
    hidden_channels: int
    channels: int
    levels: Tuple[int, ...]
    bits: int
    semantic_bits: int

    @property
    def dim(self) -> int:
        return self.channels * sum(g * g for g in self.levels)

    @staticmethod
    def from_config(cfg: RunConfig, kind: str = KIND_INSTANCE) -> "ModelShapes":
        return ModelShapes(
            kind=kind,
            categories=cfg.scene.categories,
            in_channels=cfg.scene.channels,
            hidden_channels=cfg.model.hidden_channels,
            channels=cfg.pyramid.channels,
            levels=tuple(cfg.pyramid.levels),
            bits=cfg.model.bits,
            semantic_bits=cfg.model.semantic_bits if (kind == KIND_INSTANCE and cfg.model.semantic_head) else 0,
        )

    def tensor_shapes(self) -> List[Tuple[str, Tuple[int, ...]]]:
        c, b, q = self.categories, self.bits, self.semantic_bits
        shapes = [
            ("conv1.W", (self.hidden_channels, self.in_channels, 3, 3)),
            ("conv1.b", (self.hidden_channels,)),
            ("conv2.W", (self.channels, self.hidden_channels, 3, 3)),
            ("conv2.b", (self.channels,)),
        ]
        if self.kind == KIND_FLAT:
            return shapes + [
                ("flat.mean", (self.channels,)),
                ("flat.scale", (self.channels,)),
                ("flat.W", (self.channels, c * b)),
                ("flat.b", (c * b,)),
            ]
        shapes += [
            ("cls.W", (self.dim, c)),
            ("cls.b", (c,)),
            ("hash.W", (self.dim, b)),
            ("hash.b", (b,)),
        ]
        if q:
            shapes += [("sem.W", (c * b, q)), ("sem.b", (q,))]
        return shapes

    def header(self) -> Dict[str, object]:
        return {
            "kind": self.kind,
            "c": self.categories,
            "in_channels": self.in_channels,
            "hidden_channels": self.hidden_channels,
            "d": self.dim,
            "b": self.bits,
            "q": self.semantic_bits,
            "pyramid": {"channels": self.channels, "levels": list(self.levels)},
        }

    @staticmethod
    def from_header(h: Dict[str, object]) -> "ModelShapes":
        try:
            pyramid = h["pyramid"]
            shapes = ModelShapes(
                kind=str(h["kind"]),
                categories=int(h["c"]),
                in_channels=int(h["in_channels"]),
                hidden_channels=int(h["hidden_channels"]),
                channels=int(pyramid["channels"]),
                levels=tuple(int(g) for g in pyramid["levels"]),
                bits=int(h["b"]),
                semantic_bits=int(h["q"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointError(f"checkpoint header is missing or has a bad field: {e}") from e
        if shapes.dim != int(h.get("d", -1)):
            raise CheckpointError(f"checkpoint field 'd' is {h.get('d')}, pyramid implies {shapes.dim}")
        return shapes


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


@dataclass
class ModelParams:
    shapes: ModelShapes
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name, _ in self.shapes.tensor_shapes():
            yield name, self.tensors[name]

    def zeros_like(self) -> "ModelParams":
        return ModelParams(self.shapes, {name: np.zeros_like(t) for name, t in self})

    def copy(self) -> "ModelParams":
        return ModelParams(self.shapes, {name: t.copy() for name, t in self})

    def accumulate(self, grads: Dict[str, np.ndarray], scale: float = 1.0) -> None:
        for name, g in grads.items():
            self.tensors[name] += scale * g

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.reshape(-1) for _, t in self])

    def assign_flat(self, flat: np.ndarray) -> None:
        offset = 0
        for name, t in self:
            n = t.size
            self.tensors[name] = np.asarray(flat[offset:offset + n], dtype=np.float64).reshape(t.shape).copy()
            offset += n

    @staticmethod
    def zeros(shapes: ModelShapes) -> "ModelParams":
        return ModelParams(shapes, {name: np.zeros(shape) for name, shape in shapes.tensor_shapes()})


def _fans(name: str, shape: Tuple[int, ...]) -> Tuple[int, int]:
    if len(shape) == 4:
        receptive = shape[2] * shape[3]
        return shape[1] * receptive, shape[0] * receptive
    return shape[0], shape[1]


def init_params(shapes: ModelShapes, rng: SeededRng) -> ModelParams:
    """Glorot-uniform weights, zero biases, unit feature scale."""
    params = ModelParams.zeros(shapes)
    if "flat.scale" in params.tensors:
        params.tensors["flat.scale"] = np.ones(shapes.channels)
    for name, shape in shapes.tensor_shapes():
        if name.endswith(".W"):
            fan_in, fan_out = _fans(name, shape)
            r = glorot_limit(fan_in, fan_out)
            params.tensors[name] = rng.child("init", name).uniform(-r, r, size=shape)
    return params
