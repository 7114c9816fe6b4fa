"""Dataclasses for synthetic scenes and region proposals."""
from __future__ import annotations
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

Box = Tuple[int, int, int, int]  # x1, y1, x2, y2; x2/y2 exclusive


@dataclass(frozen=True)
class SceneObject:
    category: int
    box: Box


@dataclass(frozen=True)
class Proposal:
    """A candidate box plus its coordinates normalized to [0, 1]."""
    box: Box
    L: Tuple[float, float, float, float]

    @staticmethod
    def from_box(box: Box, width: int, height: int) -> "Proposal":
        x1, y1, x2, y2 = (int(v) for v in box)
        if not (0 <= x1 < x2 <= width and 0 <= y1 < y2 <= height):
            raise ValueError(f"box {box} is not a valid box inside a {width}x{height} image")
        return Proposal(box=(x1, y1, x2, y2), L=(x1 / width, y1 / height, x2 / width, y2 / height))


@dataclass
class Scene:
    id: int
    pixels: np.ndarray  # float32, (channels, H, W), values in [0, 1]
    objects: List[SceneObject]
    labels: np.ndarray  # uint8 flags, length c
    proposals: List[Proposal] = field(default_factory=list)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[2])

    @property
    def num_categories(self) -> int:
        return int(self.labels.shape[0])

    def boxes_normalized(self) -> np.ndarray:
        return np.array([p.L for p in self.proposals], dtype=np.float64).reshape(-1, 4)


def box_iou(a: Box, b: Box) -> float:
    ix = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def labels_from_objects(objects: List[SceneObject], categories: int) -> np.ndarray:
    y = np.zeros(categories, dtype=np.uint8)
    for obj in objects:
        y[obj.category] = 1
    return y
