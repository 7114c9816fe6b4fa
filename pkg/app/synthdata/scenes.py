"""Deterministic multi-label scene generator.

Each category owns an oriented stripe texture (orientation ``pi * j / c``);
an object is its category's texture painted into a box over a uniform noise
background.
"""
from __future__ import annotations
import logging
import math
from typing import List

import numpy as np

from app.core.config import SceneConfig
from app.core.errors import SceneGenerationError
from app.numerics.rng import SeededRng
from app.synthdata.types import Box, Scene, SceneObject, box_iou, labels_from_objects

log = logging.getLogger(__name__)


def category_texture(category: int, cfg: SceneConfig, height: int, width: int, phase: float) -> np.ndarray:
    theta = math.pi * category / cfg.categories
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    wave = (xs * math.cos(theta) + ys * math.sin(theta)) * (2.0 * math.pi / cfg.stripe_period)
    return 0.5 + 0.5 * np.sin(wave + phase)


def _place_box(rng: SeededRng, cfg: SceneConfig, placed: List[Box]) -> Box:
    for _ in range(cfg.placement_retries):
        w = int(rng.integers(cfg.min_box, cfg.max_box + 1))
        h = int(rng.integers(cfg.min_box, cfg.max_box + 1))
        x1 = int(rng.integers(0, cfg.width - w + 1))
        y1 = int(rng.integers(0, cfg.height - h + 1))
        box = (x1, y1, x1 + w, y1 + h)
        if all(box_iou(box, other) <= cfg.max_overlap for other in placed):
            return box
    raise SceneGenerationError(
        f"could not place object after {cfg.placement_retries} retries "
        f"(config: {cfg.model_dump_json()})"
    )


def generate_scene(rng: SeededRng, cfg: SceneConfig, scene_id: int = 0) -> Scene:
    """Draw one scene; a pure function of the rng state and ``cfg``."""
    counts = list(range(cfg.min_objects, cfg.max_objects + 1))
    k = counts[int(rng.choice(len(counts), size=1, replace=True, p=cfg.count_distribution())[0])]
    categories = [int(j) for j in rng.choice(cfg.categories, size=k, replace=False)]

    canvas = rng.uniform(0.0, cfg.noise, size=(cfg.height, cfg.width))
    objects: List[SceneObject] = []
    placed: List[Box] = []
    for category in categories:
        box = _place_box(rng, cfg, placed)
        placed.append(box)
        x1, y1, x2, y2 = box
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        canvas[y1:y2, x1:x2] = category_texture(category, cfg, y2 - y1, x2 - x1, phase)
        objects.append(SceneObject(category=category, box=box))

    pixels = np.repeat(canvas[None, :, :], cfg.channels, axis=0).astype(np.float32)
    return Scene(
        id=scene_id,
        pixels=np.clip(pixels, 0.0, 1.0),
        objects=objects,
        labels=labels_from_objects(objects, cfg.categories),
    )
