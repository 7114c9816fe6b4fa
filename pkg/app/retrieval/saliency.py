"""Per-category saliency maps from region proposals and their probabilities."""
from __future__ import annotations
from pathlib import Path
from typing import Sequence

import numpy as np

from app.core.errors import ShapeError, ValidationFailure
from app.synthdata.types import Proposal, Scene


def saliency_map(scene: Scene, proposals: Sequence[Proposal], P: np.ndarray, j: int) -> np.ndarray:
    """Sum of P[i, j] over the proposals covering each pixel, divided by the map's maximum."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != len(proposals):
        raise ShapeError(f"{len(proposals)} proposals but P has shape {P.shape}")
    if not 0 <= j < P.shape[1]:
        raise ValidationFailure(f"category {j} outside 0..{P.shape[1] - 1}")
    heat = np.zeros((scene.height, scene.width))
    for proposal, weight in zip(proposals, P[:, j]):
        x1, y1, x2, y2 = proposal.box
        heat[y1:y2, x1:x2] += weight
    peak = heat.max()
    return heat / peak if peak > 0 else heat


def write_pgm(path: Path, grid: np.ndarray) -> Path:
    """Binary portable graymap (P5), maxval 255, values in [0, 1] scaled and rounded."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ShapeError(f"a graymap needs a 2-d grid, got shape {grid.shape}")
    pixels = np.rint(np.clip(grid, 0.0, 1.0) * 255.0).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h, w = pixels.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())
    return path
