"""Shared helpers for gradient certification tests."""
import json
from typing import Callable, Optional, Tuple

import numpy as np

from app.core.config import RunConfig
from app.numerics.gradcheck import finite_diff_check
from app.numerics.rng import SeededRng

TOLERANCE = 1e-4
EPS = 1e-3


def _same(a, b) -> bool:
    if isinstance(a, (tuple, list)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def stable_fd_check(f: Callable[[np.ndarray], Tuple[float, object]], x: np.ndarray,
                    grad: np.ndarray, eps: float = EPS) -> Optional[float]:
    """finite_diff_check for an f that also returns its activation pattern.

    Returns None when any shifted evaluation switched the pattern (a kink lies within eps),
    so the instance has to be redrawn.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    _, base = f(x.copy())
    patterns = []

    def scalar(v):
        value, pattern = f(v)
        patterns.append(pattern)
        return value

    err = finite_diff_check(scalar, x, grad, eps)
    if any(not _same(p, base) for p in patterns):
        return None
    return err


def certify(make_instance: Callable[[SeededRng], Optional[tuple]], count: int = 10,
            max_draws: int = 300) -> float:
    """Worst relative error over ``count`` accepted seeded instances.

    ``make_instance(rng)`` returns ``(f, x, grad)`` with f as in stable_fd_check,
    or None to reject the draw.
    """
    accepted = 0
    worst = 0.0
    for seed in range(max_draws):
        instance = make_instance(SeededRng(seed))
        if instance is None:
            continue
        f, x, grad = instance
        err = stable_fd_check(f, x, grad)
        if err is None:
            continue
        worst = max(worst, err)
        accepted += 1
        if accepted == count:
            break
    assert accepted == count, f"only {accepted} of {count} instances accepted in {max_draws} draws"
    return worst


def no_pattern(value: float) -> Tuple[float, tuple]:
    return value, ()


TINY = {
    "seed": 3,
    "scene": {
        "categories": 3, "height": 8, "width": 8, "min_objects": 1, "max_objects": 2, "min_box": 3,
        "max_box": 5, "proposals": 3, "train_size": 6, "database_size": 5, "query_size": 3,
    },
    "pyramid": {"levels": [2, 1], "channels": 2},
    "model": {"hidden_channels": 2, "bits": 4, "semantic_bits": 5},
    "train": {"base_lr": 0.01, "batch_size": 4, "iterations": 3, "triplet_cap": 16, "category_triplets": 2,
              "log_every": 1},
    "evaluation": {"depths": [2, 5]},
}


def tiny_config(**sections) -> RunConfig:
    """A miniature run document; keyword arguments update whole sections."""
    doc = json.loads(json.dumps(TINY))
    for name, values in sections.items():
        if isinstance(values, dict):
            doc.setdefault(name, {}).update(values)
        else:
            doc[name] = values
    return RunConfig.model_validate(doc)
