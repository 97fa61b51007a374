"""Substream seeding and order-independent batch accumulation."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


def substream(seed: int, *index: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, *index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, index)])))


@dataclass(frozen=True)
class Moments:
    n: int = 0
    s1: float = 0.0
    s2: float = 0.0

    @classmethod
    def of(cls, x) -> "Moments":
        x = np.asarray(x, dtype=float)
        return cls(x.size, float(x.sum()), float(np.square(x).sum()))

    def __add__(self, other: "Moments") -> "Moments":
        return Moments(self.n + other.n, self.s1 + other.s1, self.s2 + other.s2)

    @property
    def mean(self) -> float:
        return self.s1 / self.n if self.n else float("nan")

    @property
    def stderr(self) -> float:
        if self.n < 2:
            return float("nan")
        m = self.mean
        var = max(self.s2 / self.n - m * m, 0.0) * self.n / (self.n - 1)
        return float(np.sqrt(var / self.n))


def batch_sizes(n: int, batch_size: int) -> list[int]:
    full, rest = divmod(int(n), int(batch_size))
    return [batch_size] * full + ([rest] if rest else [])


def run_batches(fn, n: int, batch_size: int, workers: int = 1) -> list:
    """Call ``fn(index, size)`` for every batch; results come back in batch order.

    Merging the returned list left to right gives the same floating-point sums
    whatever the number of workers.
    """
    sizes = batch_sizes(n, batch_size)
    if workers <= 1 or len(sizes) == 1:
        return [fn(i, s) for i, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, i, s) for i, s in enumerate(sizes)]
        return [f.result() for f in futures]
