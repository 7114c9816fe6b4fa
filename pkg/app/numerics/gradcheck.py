from __future__ import annotations
import math
from typing import Callable

import numpy as np

from app.core.errors import ShapeError, ValidationFailure


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic_grad: np.ndarray,
    eps: float = 1e-3,
) -> float:
    """Max relative error between ``analytic_grad`` and central differences of ``f`` at ``x``.

    The relative error of coordinate i is
    ``|g_fd(i) - g(i)| / max(1e-8, |g_fd(i)| + |g(i)|)``.
    ``x`` is not modified.
    """
    if eps <= 0:
        raise ValidationFailure(f"eps must be positive, got {eps}")
    x = np.array(x, dtype=np.float64).reshape(-1)
    g = np.asarray(analytic_grad, dtype=np.float64).reshape(-1)
    if g.shape != x.shape:
        raise ShapeError(f"gradient has {g.size} entries, parameter vector has {x.size}")

    worst = 0.0
    point = x.copy()
    for i in range(x.size):
        point[i] = x[i] + eps
        f_plus = float(f(point))
        point[i] = x[i] - eps
        f_minus = float(f(point))
        point[i] = x[i]
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise ValidationFailure(f"f is not finite around coordinate {i}")
        g_fd = (f_plus - f_minus) / (2.0 * eps)
        err = abs(g_fd - g[i]) / max(1e-8, abs(g_fd) + abs(g[i]))
        worst = max(worst, err)
    return worst
