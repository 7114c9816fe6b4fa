"""Plain SGD training for the instance-aware network and the flat baseline.

Each iteration draws a batch from an epoch-wise seeded permutation of the
training split, runs every image forward, sums the classification loss, the
per-category triplet loss and the weighted semantic triplet loss (each
averaged over its contributing terms and scaled by its configured weight),
backpropagates image by image in batch order and applies
``theta <- theta - lr * g``. The learning rate is divided by 10 every
``lr_drop_epochs`` epochs, an epoch being one pass over the training split.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from app.core.config import RunConfig, settings
from app.core.errors import TrainingDiverged, ValidationFailure
from app.model.hashcode import category_triplet_loss, shared_labels, weighted_triplet_loss
from app.model.labelprob import classification_loss
from app.model.network import build_model
from app.model.baseline import FlatBaseline
from app.model.params import FIXED_TENSORS, KIND_FLAT, KIND_INSTANCE, ModelParams, ModelShapes, init_params
from app.numerics.rng import SeededRng
from app.synthdata.types import Scene
from app.training.triplets import generate_triplets, sample_category_triplets

log = logging.getLogger(__name__)


def learning_rate(base_lr: float, epoch: int, lr_drop_epochs: int) -> float:
    return base_lr / (10.0 ** (epoch // lr_drop_epochs))


@dataclass(frozen=True)
class LossRecord:
    iteration: int
    lr: float
    loss_cls: float
    loss_cat: float
    loss_sem: float
    total: float

    def line(self) -> str:
        return (f"{self.iteration}, {self.lr!r}, {self.loss_cls!r}, {self.loss_cat!r}, "
                f"{self.loss_sem!r}, {self.total!r}")


@dataclass
class TrainResult:
    params: ModelParams
    trace: List[LossRecord] = field(default_factory=list)


@dataclass(frozen=True)
class TripletPlan:
    category: np.ndarray  # (T, 4): j, anchor, positive, negative
    semantic: np.ndarray  # (T, 3)


@dataclass
class StepResult:
    components: Dict[str, float]
    grads: ModelParams


def plan_triplets(labels: np.ndarray, cfg: RunConfig, rng: SeededRng, semantic: bool) -> TripletPlan:
    rows = []
    if cfg.model.category_head:
        for j in range(labels.shape[1]):
            for a, p, n in sample_category_triplets(labels, j, cfg.train.category_triplets, rng.child("cat", j)):
                rows.append((j, a, p, n))
    category = np.array(rows, dtype=np.int64).reshape(-1, 4)
    if semantic:
        sem = generate_triplets(labels, cfg.train.triplet_cap, rng.child("sem"))
    else:
        sem = np.zeros((0, 3), dtype=np.int64)
    return TripletPlan(category=category, semantic=sem)


def _category_terms(fs: Sequence[np.ndarray], plan: TripletPlan, margin: float, weight: float,
                    grad_f: List[np.ndarray]) -> float:
    if len(plan.category) == 0:
        return 0.0
    scale = weight / len(plan.category)
    total = 0.0
    for j, a, p, n in plan.category:
        res = category_triplet_loss(fs[a], fs[p], fs[n], int(j), margin)
        total += res.loss
        grad_f[a] += scale * res.grad_a
        grad_f[p] += scale * res.grad_pos
        grad_f[n] += scale * res.grad_neg
    return total / len(plan.category)


def compute_step(model, scenes: Sequence[Scene], cfg: RunConfig, rng: SeededRng) -> StepResult:
    """Loss components and the batch gradient for one mini-batch (no parameter update)."""
    labels = np.stack([s.labels for s in scenes]).astype(np.int64)
    t = cfg.train
    margin = cfg.model.margin
    grads = model.params.zeros_like()

    if model.shapes.kind == KIND_FLAT:
        fps = [model.forward(s.pixels) for s in scenes]
        grad_f = [np.zeros_like(fp.f) for fp in fps]
        plan = plan_triplets(labels, cfg, rng, semantic=False)
        loss_cat = _category_terms([fp.f for fp in fps], plan, margin, t.category_weight, grad_f)
        for fp, gf in zip(fps, grad_f):
            grads.accumulate(model.backward(fp, gf))
        components = {"loss_cls": 0.0, "loss_cat": loss_cat, "loss_sem": 0.0,
                      "total": t.category_weight * loss_cat}
        return StepResult(components=components, grads=grads)

    fps = [model.forward(s.pixels, s.boxes_normalized()) for s in scenes]
    B = len(fps)
    grad_m: List[Optional[np.ndarray]] = [None] * B
    grad_f = [np.zeros_like(fp.f) for fp in fps]
    semantic = model.shapes.semantic_bits > 0
    grad_s = [np.zeros_like(fp.s) if semantic else None for fp in fps]

    # images with an empty label set do not enter the classification loss
    valid = [i for i in range(B) if labels[i].sum() >= 1]
    loss_cls = 0.0
    for i in valid:
        loss, g = classification_loss(fps[i].p, labels[i])
        loss_cls += loss / len(valid)
        grad_m[i] = t.cls_weight * g / len(valid)

    plan = plan_triplets(labels, cfg, rng, semantic=semantic)
    loss_cat = _category_terms([fp.f for fp in fps], plan, margin, t.category_weight, grad_f)

    loss_sem = 0.0
    if len(plan.semantic):
        scale = t.semantic_weight / len(plan.semantic)
        for a, p, n in plan.semantic:
            res = weighted_triplet_loss(fps[a].s, fps[p].s, fps[n].s,
                                        shared_labels(labels[a], labels[p]),
                                        shared_labels(labels[a], labels[n]), margin)
            loss_sem += res.loss / len(plan.semantic)
            grad_s[a] += scale * res.grad_a
            grad_s[p] += scale * res.grad_pos
            grad_s[n] += scale * res.grad_neg

    for i in range(B):
        grads.accumulate(model.backward(fps[i], grad_m[i], grad_f[i], grad_s[i]))
    total = t.cls_weight * loss_cls + t.category_weight * loss_cat + t.semantic_weight * loss_sem
    components = {"loss_cls": loss_cls, "loss_cat": loss_cat, "loss_sem": loss_sem, "total": total}
    return StepResult(components=components, grads=grads)


class BatchSampler:
    """Consecutive batches over epoch-wise seeded permutations of ``n`` items."""

    def __init__(self, n: int, batch_size: int, rng: SeededRng):
        self.n = n
        self.batch_size = batch_size
        self.rng = rng
        self._epoch = -1
        self._perm = np.arange(n)

    def epoch_of(self, iteration: int) -> int:
        return (iteration * self.batch_size) // self.n

    def batch(self, iteration: int) -> np.ndarray:
        start = iteration * self.batch_size
        out = []
        for pos in range(start, start + self.batch_size):
            epoch, offset = divmod(pos, self.n)
            out.append(self._permutation(epoch)[offset])
        return np.array(out, dtype=np.int64)

    def _permutation(self, epoch: int) -> np.ndarray:
        if self._epoch != epoch:
            self._epoch = epoch
            self._perm = self.rng.child("epoch", epoch).permutation(self.n)
        return self._perm


def _run_sgd(params: ModelParams, scenes: Sequence[Scene], cfg: RunConfig, run_id: str) -> TrainResult:
    if not scenes:
        raise ValidationFailure("training split is empty")
    t = cfg.train
    model = build_model(params)
    root = SeededRng(cfg.seed).child("train", params.shapes.kind)
    sampler = BatchSampler(len(scenes), min(t.batch_size, len(scenes)), root.child("batches"))
    result = TrainResult(params=params)
    extra = {"run_id": run_id, "stage": params.shapes.kind}

    iterations = range(t.iterations)
    if settings.progress:
        iterations = tqdm(iterations, desc=f"train[{params.shapes.kind}]")
    for it in iterations:
        lr = learning_rate(t.base_lr, sampler.epoch_of(it), t.lr_drop_epochs)
        batch = [scenes[i] for i in sampler.batch(it)]
        step = compute_step(model, batch, cfg, root.child("step", it))
        if not all(math.isfinite(v) for v in step.components.values()):
            raise TrainingDiverged(it, step.components)
        for name, g in step.grads:
            if name not in FIXED_TENSORS:
                params.tensors[name] -= lr * g
        record = LossRecord(iteration=it, lr=lr, **step.components)
        result.trace.append(record)
        if it % t.log_every == 0 or it == t.iterations - 1:
            log.info("iter %d lr %.3g cls %.4f cat %.4f sem %.4f total %.4f", it, lr,
                     record.loss_cls, record.loss_cat, record.loss_sem, record.total, extra=extra)
    return result


def train(scenes: Sequence[Scene], cfg: RunConfig, params: Optional[ModelParams] = None,
          run_id: str = "-") -> TrainResult:
    if params is None:
        params = init_params(ModelShapes.from_config(cfg, KIND_INSTANCE), SeededRng(cfg.seed).child("init"))
    return _run_sgd(params, scenes, cfg, run_id)


def train_baseline(scenes: Sequence[Scene], cfg: RunConfig, params: Optional[ModelParams] = None,
                   run_id: str = "-") -> TrainResult:
    if params is None:
        params = init_params(ModelShapes.from_config(cfg, KIND_FLAT), SeededRng(cfg.seed).child("init"))
        if scenes:
            FlatBaseline(params).fit_feature_scaling(scenes)
    return _run_sgd(params, scenes, cfg, run_id)


def write_trace(path: Path, trace: Sequence[LossRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("iter, lr, loss_cls, loss_cat, loss_sem, total\n")
        for record in trace:
            f.write(record.line() + "\n")
    return path
