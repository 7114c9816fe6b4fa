"""Region proposals derived from ground-truth placements.

The first k proposals are jittered copies of the k object boxes (in object
order), followed by further copies and then random distractor boxes, so the
list always holds exactly N boxes.
"""
from __future__ import annotations
from typing import List

from app.core.errors import ValidationFailure
from app.numerics.rng import SeededRng
from app.synthdata.types import Box, Proposal, Scene

MIN_DISTRACTOR_AREA = 4


def jitter_box(box: Box, jitter: float, rng: SeededRng, width: int, height: int) -> Box:
    x1, y1, x2, y2 = box
    bw, bh = x2 - x1, y2 - y1
    if jitter <= 0:
        return box
    dx = rng.uniform(-jitter * bw, jitter * bw, size=2)
    dy = rng.uniform(-jitter * bh, jitter * bh, size=2)
    nx1 = min(max(int(round(x1 + dx[0])), 0), width - 1)
    ny1 = min(max(int(round(y1 + dy[0])), 0), height - 1)
    nx2 = min(max(int(round(x2 + dx[1])), nx1 + 1), width)
    ny2 = min(max(int(round(y2 + dy[1])), ny1 + 1), height)
    return (nx1, ny1, nx2, ny2)


def random_box(rng: SeededRng, width: int, height: int) -> Box:
    while True:
        xs = sorted(int(v) for v in rng.integers(0, width + 1, size=2))
        ys = sorted(int(v) for v in rng.integers(0, height + 1, size=2))
        if xs[0] < xs[1] and ys[0] < ys[1] and (xs[1] - xs[0]) * (ys[1] - ys[0]) >= MIN_DISTRACTOR_AREA:
            return (xs[0], ys[0], xs[1], ys[1])


def generate_proposals(
    scene: Scene,
    N: int,
    rng: SeededRng,
    jitter: float = 0.1,
    copies_per_object: int = 2,
) -> List[Proposal]:
    if N < 1:
        raise ValidationFailure(f"number of proposals must be >= 1, got {N}")
    if N < len(scene.objects):
        raise ValidationFailure(f"N={N} is smaller than the {len(scene.objects)} objects in scene {scene.id}")
    if not 0.0 <= jitter <= 0.2:
        raise ValidationFailure(f"jitter must lie in [0, 0.2], got {jitter}")

    W, H = scene.width, scene.height
    boxes: List[Box] = []
    for _ in range(copies_per_object):
        for obj in scene.objects:
            boxes.append(jitter_box(obj.box, jitter, rng, W, H))
    boxes = boxes[:N]
    while len(boxes) < N:
        boxes.append(random_box(rng, W, H))
    return [Proposal.from_box(b, W, H) for b in boxes]
