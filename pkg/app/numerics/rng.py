"""Seeded random streams.

PCG64 bit streams are specified independently of platform, so identical seeds
give identical draws everywhere. Named child streams are derived by hashing
``(seed, name)`` which keeps per-scene and per-step randomness independent of
iteration order.
"""
from __future__ import annotations
import hashlib
from typing import Sequence

import numpy as np


class SeededRng:
    def __init__(self, seed: int):
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, *names: object) -> "SeededRng":
        key = ":".join([str(self.seed)] + [str(n) for n in names]).encode("utf-8")
        digest = hashlib.sha256(key).digest()
        return SeededRng(int.from_bytes(digest[:8], "little"))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        """Integers in [low, high)."""
        return self._gen.integers(low, high, size=size)

    def choice(self, n: int, size: int, replace: bool = False, p: Sequence[float] | None = None):
        return self._gen.choice(n, size=size, replace=replace, p=p)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)
