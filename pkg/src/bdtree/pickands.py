"""Monte Carlo estimation of Pickands-type constants.

For ``N`` independent Brownian motions and scale ``lam`` the constant is

    H_{N,lam} = int P{exists t >= 0: lam B(t) - lam^2 t > x} exp(sum x) dx,

and its finite-horizon version ``H(L)`` restricts ``t`` to ``[0, L]`` for the
driftless path with prefactor ``exp(-L N lam^2 / 2)``. For a sampled path the
``x``-integral is evaluated exactly: the set of ``x`` lying below some path
point is a union of lower orthants whose ``exp(sum x)``-measure is computed by
:func:`staircase_measure`.

Grid points alone give a lower bound (the sup between grid times is missed),
so segments whose Brownian-bridge excursion could still poke out of the
current union are bisected with bridge midpoints.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from ._batch import Moments, run_batches, substream
from .errors import AntichainTooLarge, BadArguments, NoConvergence

ANTICHAIN_CAP = 30


@dataclass(frozen=True)
class PickandsConfig:
    n: int = 100_000
    seed: int = 0
    steps: int = 1024
    refine_depth: int | None = None
    kappa: float = 3.0
    batch_size: int = 2000
    workers: int = 1


@dataclass(frozen=True)
class PickandsEstimate:
    N: int
    lam: float
    L: float
    value: float
    stderr: float
    n: int
    infinite: bool = False

    def to_dict(self) -> dict:
        return {"N": self.N, "lambda": self.lam, "L": self.L, "value": self.value, "stderr": self.stderr}


# -- staircase measure ----------------------------------------------------------


def pareto_front(points) -> np.ndarray:
    """Maximal points (no other point is >= in every coordinate), without duplicates."""
    P = np.unique(np.atleast_2d(np.asarray(points, dtype=float)), axis=0)
    if len(P) < 2:
        return P
    # a dominating point has a larger (rounded) coordinate sum and, on ties, is
    # lexicographically larger, so it comes first in this order
    P = P[np.lexsort((*(-P[:, i] for i in range(P.shape[1] - 1, -1, -1)), -P.sum(axis=1)))]
    keep = np.ones(len(P), dtype=bool)
    step = max(1, 4_000_000 // (len(P) * P.shape[1]))
    for a in range(0, len(P), step):
        B = P[a : a + step]
        ge = (P[None, :, :] >= B[:, None, :]).all(axis=2)
        # only earlier points can dominate
        ge &= np.arange(len(P))[None, :] < np.arange(a, a + len(B))[:, None]
        keep[a : a + len(B)] = ~ge.any(axis=1)
    return P[keep]


def _sweep2(a, b) -> float:
    """Union measure in two dimensions for any point set given by coordinates ``a``, ``b``."""
    order = np.argsort(-a, kind="stable")
    cm = np.maximum.accumulate(b[order])
    prev = np.r_[0.0, np.exp(cm[:-1])]
    return float(np.sum(np.exp(a[order]) * (np.exp(cm) - prev)))


def _sweep(F) -> float:
    """Measure of the union of lower orthants at antichain ``F`` (rows), any dimension."""
    K, N = F.shape
    if N == 1:
        return float(np.exp(F[:, 0].max()))
    if N == 2:
        return _sweep2(F[:, 0], F[:, 1])
    # slice along the last coordinate: above z only points with y_N > z contribute
    order = np.argsort(-F[:, -1], kind="stable")
    z = F[order, -1]
    G = F[order, :-1]
    total = 0.0
    for k in range(K):
        lo = math.exp(z[k + 1]) if k + 1 < K else 0.0
        width = math.exp(z[k]) - lo
        if width > 0:
            inner = _sweep2(G[: k + 1, 0], G[: k + 1, 1]) if N == 3 else _sweep(pareto_front(G[: k + 1]))
            total += width * inner
    return total


def _inclusion_exclusion(F) -> float:
    K = len(F)
    total = 0.0
    for r in range(1, K + 1):
        sign = 1.0 if r % 2 else -1.0
        for S in itertools.combinations(range(K), r):
            total += sign * math.exp(F[list(S)].min(axis=0).sum())
    return total


def staircase_measure(points, method: str = "sweep", cap: int | None = None) -> float:
    """``int 1{x < y for some y in points} exp(sum x) dx``.

    The points are first reduced to their Pareto frontier. ``method="sweep"``
    slices coordinate by coordinate; ``method="inclusion_exclusion"`` sums over
    subsets of the frontier and refuses frontiers larger than ``cap``
    (default 30).
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.size == 0:
        raise BadArguments("staircase_measure needs at least one point")
    F = pareto_front(P)
    if method == "inclusion_exclusion":
        cap = ANTICHAIN_CAP if cap is None else cap
        if len(F) > cap:
            raise AntichainTooLarge(f"Pareto frontier has {len(F)} points, cap is {cap}")
        return _inclusion_exclusion(F)
    if method != "sweep":
        raise BadArguments(f"unknown method {method!r}")
    if cap is not None and len(F) > cap:
        raise AntichainTooLarge(f"Pareto frontier has {len(F)} points, cap is {cap}")
    return _sweep(F)


def _staircase_rows(Y) -> np.ndarray:
    """Staircase measure of every path in ``Y`` (shape ``(n, k, N)``; ``-inf`` rows are padding)."""
    n, _, N = Y.shape
    if N == 1:
        return np.exp(Y[:, :, 0].max(axis=1))
    if N == 2:
        order = np.argsort(-Y[:, :, 0], axis=1, kind="stable")
        a = np.take_along_axis(Y[:, :, 0], order, axis=1)
        b = np.take_along_axis(Y[:, :, 1], order, axis=1)
        eb = np.exp(np.maximum.accumulate(b, axis=1))
        inc = np.diff(eb, axis=1, prepend=0.0)
        return np.sum(np.exp(a) * inc, axis=1)
    out = np.empty(n)
    for p in range(n):
        rows = Y[p][np.isfinite(Y[p]).all(axis=1)]
        out[p] = _sweep(pareto_front(rows))
    return out


# -- path sampling and refinement ------------------------------------------------


def _paths(n, N, lam, L, steps, drift, rng):
    """``lam B(t) + drift lam^2 t`` on a uniform grid of ``steps`` steps over ``[0, L]``."""
    dt = L / steps
    Z = rng.standard_normal((n, steps, N))
    Z *= lam * math.sqrt(dt)
    Z += drift * lam * lam * dt
    Y = np.empty((n, steps + 1, N))
    Y[:, 0, :] = 0.0
    np.cumsum(Z, axis=1, out=Y[:, 1:, :])
    return Y, dt


def _frontiers(Y) -> np.ndarray:
    """Per-path Pareto frontiers padded with ``-inf`` to a common length."""
    n, _, N = Y.shape
    if N == 1:
        return Y.max(axis=1, keepdims=True)
    if N == 2:
        return _compact(Y)
    fronts = [pareto_front(Y[p]) for p in range(n)]
    K = max(len(f) for f in fronts)
    out = np.full((n, K, N), -np.inf)
    for p, f in enumerate(fronts):
        out[p, : len(f)] = f
    return out


def _dominated(U, owner, F, budget=4_000_000):
    """Whether each corner ``U[s]`` lies below some frontier point of path ``owner[s]``."""
    N = U.shape[1]
    if N == 1:
        return U[:, 0] <= F[owner, 0, 0]
    if N == 2:
        return _dominated2(U, owner, F)
    # frontier rows are sorted by decreasing coordinate sum, so the first few
    # columns settle most corners; only the rest see the whole frontier
    out = _dominated_block(U, owner, F[:, :32], budget)
    rest = np.flatnonzero(~out)
    if F.shape[1] > 32 and len(rest):
        out[rest] = _dominated_block(U[rest], owner[rest], F, budget)
    return out


def _dominated_block(U, owner, F, budget):
    N = U.shape[1]
    chunk = max(1, budget // (F.shape[1] * N))
    out = np.empty(len(U), dtype=bool)
    for a in range(0, len(U), chunk):
        b = min(a + chunk, len(U))
        G = F[owner[a:b]]
        below = G[:, :, 0] >= U[a:b, None, 0]
        for i in range(1, N):
            below &= G[:, :, i] >= U[a:b, None, i]
        out[a:b] = below.any(axis=1)
    return out


def _dominated2(U, owner, F):
    # F rows come from _compact: first coordinate decreasing, second increasing,
    # padding at the end. Count the points with a >= U_a by one global
    # searchsorted over per-path blocks laid end to end on the real line.
    n, K, _ = F.shape
    a = F[:, :, 0]
    fin = np.isfinite(a)
    lo = min(a[fin].min(), U[:, 0].min()) - 1.0
    hi = max(a[fin].max(), U[:, 0].max()) + 1.0
    width = hi - lo
    key = np.where(fin, hi - a, width) + width * 1.5 * np.arange(n)[:, None]
    q = (hi - U[:, 0]) + width * 1.5 * owner
    pos = np.searchsorted(key.ravel(), q, side="right") - owner * K
    b_at = F[owner, np.maximum(pos - 1, 0), 1]
    return (pos > 0) & (b_at >= U[:, 1])


def _compact(F):
    """Drop dominated and padding rows from padded per-path point sets."""
    n, K, N = F.shape
    if N == 1:
        return F
    if N == 2:
        order = np.argsort(-F[:, :, 0], axis=1, kind="stable")
        G = np.take_along_axis(F, order[:, :, None], axis=1)
        b = G[:, :, 1]
        prev = np.maximum.accumulate(np.concatenate([np.full((n, 1), -np.inf), b[:, :-1]], axis=1), axis=1)
        keep = (b > prev) & np.isfinite(G[:, :, 0])
    else:
        fronts = [pareto_front(F[p][np.isfinite(F[p, :, 0])]) for p in range(n)]
        out = np.full((n, max(max(len(f) for f in fronts), 1), N), -np.inf)
        for p, f in enumerate(fronts):
            out[p, : len(f)] = f
        return out
    width = max(int(keep.sum(axis=1).max()), 1)
    pos = np.argsort(~keep, axis=1, kind="stable")[:, :width]
    out = np.take_along_axis(G, pos[:, :, None], axis=1)
    valid = np.take_along_axis(keep, pos, axis=1)
    out[~valid] = -np.inf
    return out


def _refined_values(Y, dt, lam, rng, config, shift=None):
    """Staircase measure of each path including bridge midpoints where they can matter.

    ``shift`` (per path, per coordinate) is subtracted from every point first.
    """
    n, m1, N = Y.shape
    if shift is not None:
        Y = Y - shift[:, None, :]
    F = _frontiers(Y)

    def live(corner, own):
        return ~_dominated(corner, own, F)

    pad = config.kappa * lam * math.sqrt(dt)
    left, right = Y[:, :-1, :], Y[:, 1:, :]
    U = np.maximum(left, right) + pad
    owner, step = np.nonzero(live(U.reshape(-1, N), np.repeat(np.arange(n), m1 - 1)).reshape(n, m1 - 1))
    L, R = left[owner, step], right[owner, step]
    h = dt
    for _ in range(_depth(config, N)):
        if not len(owner):
            break
        h /= 2.0
        mid = 0.5 * (L + R) + lam * math.sqrt(h / 2.0) * rng.standard_normal(L.shape)
        F = _absorb(F, mid, owner)
        pad = config.kappa * lam * math.sqrt(h)
        kl = live(np.maximum(L, mid) + pad, owner)
        kr = live(np.maximum(mid, R) + pad, owner)
        owner = np.concatenate([owner[kl], owner[kr]])
        L, R = np.concatenate([L[kl], mid[kr]]), np.concatenate([mid[kl], R[kr]])
    return _staircase_rows(F)


def _depth(config, N):
    # frontiers in three or more dimensions grow quickly with refinement
    if config.refine_depth is not None:
        return config.refine_depth
    return 10 if N <= 2 else 6


def _absorb(F, pts, owner):
    """Add the points not already below the frontier to their paths' frontiers."""
    n, _, N = F.shape
    if N == 1:
        F = F.copy()
        np.maximum.at(F[:, 0, 0], owner, pts[:, 0])
        return F
    new = ~_dominated(pts, owner, F)
    if not new.any():
        return F
    own, pts = owner[new], pts[new]
    order = np.argsort(own, kind="stable")
    own, pts = own[order], pts[order]
    counts = np.bincount(own, minlength=n)
    slot = np.arange(len(own)) - np.repeat(np.cumsum(counts) - counts, counts)
    E = np.full((n, counts.max(), N), -np.inf)
    E[own, slot] = pts
    return _compact(np.concatenate([F, E], axis=1))


def _check(N, lam, L):
    if int(N) != N or N < 1:
        raise BadArguments(f"N must be a positive integer, got {N}")
    if not lam > 0:
        raise BadArguments(f"lambda must be positive, got {lam}")
    if not L > 0:
        raise BadArguments(f"horizon must be positive, got {L}")


def _estimate(N, lam, L, config, kind):
    def one(index, size):
        rng = substream(config.seed, index)
        if kind == "drift":
            Y, dt = _paths(size, N, lam, L, config.steps, -1.0, rng)
            vals = _refined_values(Y, dt, lam, rng, config)
        elif kind == "tilted":
            # sample with drift +lam and reweight by exp(-sum lam B~(L)); this
            # shifts every point by the path's end value
            Y, dt = _paths(size, N, lam, L, config.steps, 1.0, rng)
            vals = _refined_values(Y, dt, lam, rng, config, shift=Y[:, -1, :])
        else:
            Y, dt = _paths(size, N, lam, L, config.steps, 0.0, rng)
            c = L * lam * lam / 2.0
            vals = _refined_values(Y, dt, lam, rng, config, shift=np.full((size, N), c))
        return Moments.of(vals)

    tot = sum(run_batches(one, config.n, config.batch_size, config.workers), Moments())
    return PickandsEstimate(N=int(N), lam=float(lam), L=float(L), value=tot.mean, stderr=tot.stderr, n=tot.n)


def estimate_H_L(N: int, lam: float, L: float, config: PickandsConfig, method: str = "tilted") -> PickandsEstimate:
    """Estimate of the finite-horizon constant ``H(L)``.

    ``method="plain"`` averages ``exp(-L N lam^2/2) * staircase(lam B)`` over
    driftless paths; its relative variance grows like ``exp(L N lam^2)``.
    ``method="tilted"`` samples the same quantity under the drift ``lam`` per
    coordinate with the exact likelihood ratio, which keeps the variance bounded.
    """
    _check(N, lam, L)
    if method not in ("tilted", "plain"):
        raise BadArguments(f"unknown method {method!r}")
    return _estimate(N, lam, L, config, method)


def estimate_H_drift(N: int, lam: float, L_trunc: float, config: PickandsConfig) -> PickandsEstimate:
    """Staircase average over drifted paths ``lam B(t) - lam^2 t`` on ``[0, L_trunc]``."""
    _check(N, lam, L_trunc)
    return _estimate(N, lam, L_trunc, config, "drift")


def estimate_H(
    N: int,
    lam: float,
    config: PickandsConfig,
    tol: float = 1.0,
    max_doublings: int = 6,
    L0: float | None = None,
    halving: bool = True,
) -> PickandsEstimate:
    """Drifted estimate with the truncation doubled until successive values agree.

    Agreement means a difference below ``tol`` joint standard errors. The
    drifted path falls like ``-lam^2 t``, so the start ``8 / lam^2`` already
    sits several standard deviations past the typical location of the sup.
    With ``halving`` the settled value is also recomputed on a grid with half
    the step, and the step keeps halving until the two agree as well.
    """
    L = 8.0 / lam**2 if L0 is None else float(L0)
    prev = estimate_H_drift(N, lam, L, config)
    budget = max_doublings
    cur = None
    while budget > 0:
        budget -= 1
        L *= 2
        cur = estimate_H_drift(N, lam, L, config)
        if abs(cur.value - prev.value) < tol * math.hypot(cur.stderr, prev.stderr):
            break
        prev = cur
    else:
        raise NoConvergence(f"H_{{{N},{lam}}} did not settle after {max_doublings} doublings (last L={L})")
    while halving:
        config = replace(config, steps=2 * config.steps)
        fine = estimate_H_drift(N, lam, L, config)
        if abs(fine.value - cur.value) < tol * math.hypot(fine.stderr, cur.stderr):
            cur = fine
            break
        cur = fine
        budget -= 1
        if budget < 0:
            raise NoConvergence(f"H_{{{N},{lam}}} still moves when the step is halved (steps={config.steps})")
    return PickandsEstimate(cur.N, cur.lam, cur.L, cur.value, cur.stderr, cur.n, infinite=True)


def log_staircase(points) -> float:
    """``log staircase_measure`` computed after shifting by the coordinatewise max."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    s = P.max(axis=0)
    return float(np.log(staircase_measure(P - s)) + s.sum())


__all__ = [
    "ANTICHAIN_CAP",
    "PickandsConfig",
    "PickandsEstimate",
    "pareto_front",
    "staircase_measure",
    "log_staircase",
    "estimate_H_L",
    "estimate_H_drift",
    "estimate_H",
]
