"""Simulation time grids that always contain the branching times and ``T``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .tree import TreeSpec


@dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray
    h: float
    window: float = 0.0
    fine_h: float | None = None

    @property
    def m(self) -> int:
        """Number of steps."""
        return len(self.times) - 1

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)


def _fill(a, b, h):
    k = max(int(np.ceil((b - a) / h - 1e-9)), 1)
    return np.linspace(a, b, k + 1)


def make_grid(spec: TreeSpec, h: float | None = None, window: float = 0.0, fine_h: float | None = None) -> TimeGrid:
    """Grid with step at most ``h`` (default ``T/16``), refined to ``fine_h`` on ``[T - window, T]``."""
    T = spec.T
    h = T / 16 if h is None else float(h)
    if not h > 0:
        raise ValidationError(f"grid step must be positive, got {h}")
    window = min(max(float(window), 0.0), T)
    if fine_h is not None and not 0 < fine_h <= h:
        raise ValidationError("fine step must lie in (0, h]")
    cuts = sorted({0.0, *spec.tau, T, *([T - window] if window and fine_h else [])})
    pieces = []
    for a, b in zip(cuts, cuts[1:]):
        step = fine_h if (fine_h and window and a >= T - window - 1e-12) else h
        pieces.append(_fill(a, b, step)[:-1])
    times = np.concatenate([*pieces, [T]])
    return TimeGrid(times=times, h=h, window=window, fine_h=fine_h)
