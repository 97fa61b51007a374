"""Simulation of classical binary branching Brownian motion with unit branching rate.

The event is that at some time ``t <= T`` every particle alive at ``t`` sits
above ``u + c t``. Before the first split there is a single particle, so that
part of the event has the exact Brownian-bridge crossing probability given
the simulated grid. Later occurrences need the spine (the ancestral particle)
to be above the level too, so full populations are only simulated for the
few paths whose spine gets near the level after the first split.
"""
from __future__ import annotations

import math

import numpy as np

from . import mc
from ._batch import Moments, run_batches, substream
from .errors import BadArguments, NonPositiveHorizon

FINE = 32


def _bridge_cross(a, b, level, dt):
    """Probability that a Brownian bridge from ``a`` to ``b`` over ``dt`` exceeds ``level``."""
    da = np.clip(level - a, 0, None)
    db = np.clip(level - b, 0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.exp(-2.0 * da * db / dt)
    return np.where((a > level) | (b > level), 1.0, np.where(dt > 0, p, 0.0))


def _fill(times, t0, v0, t1, v1, rng):
    """Brownian-bridge values at ``times`` strictly inside ``(t0, t1)``, sampled left to right."""
    out = np.empty(len(times))
    ta, va = t0, v0
    for j, t in enumerate(times):
        w = (t - ta) / (t1 - ta)
        mean = va + w * (v1 - va)
        sd = math.sqrt(max((t - ta) * (t1 - t) / (t1 - ta), 0.0))
        va = mean + sd * rng.standard_normal()
        ta = t
        out[j] = va
    return out


def _population_event(fine_t, spine, u, c, rng):
    """Grid check of the all-particles event for the population descended from the spine.

    ``fine_t[0]`` is the first split time and ``spine`` holds the spine's values
    on ``fine_t``. Every particle splits at rate 1; a new particle starts from
    its parent's value at the next grid time.
    """
    dt = np.diff(fine_t)
    rows = [spine]
    _spawn(rows, 0, spine, fine_t, dt, rng)
    t = fine_t[0]
    while True:
        t += rng.exponential()
        if t >= fine_t[-1]:
            break
        _spawn(rows, int(np.searchsorted(fine_t, t)), spine, fine_t, dt, rng)
    X = np.vstack(rows)
    level = u + c * fine_t
    above = np.where(np.isnan(X), True, X > level[None, :])
    return bool(above.all(axis=0).any())


def _spawn(rows, k0, parent, fine_t, dt, rng):
    """Add a particle born at grid index ``k0`` from ``parent`` and all of its descendants."""
    m = len(fine_t)
    stack = [(k0, parent)]
    while stack:
        k, par = stack.pop()
        path = np.full(m, np.nan)
        path[k] = par[k]
        if k + 1 < m:
            path[k + 1 :] = par[k] + np.cumsum(rng.standard_normal(m - k - 1) * np.sqrt(dt[k:]))
        rows.append(path)
        t = fine_t[k]
        while True:
            t += rng.exponential()
            if t >= fine_t[-1]:
                break
            stack.append((int(np.searchsorted(fine_t, t)), path))


def estimate_classical(u: float, c: float, T: float, config: mc.MCConfig) -> mc.MCEstimate:
    """Crude estimate of the all-particles exceedance probability for binary BBM.

    The part before the first split is Rao-Blackwellised with bridge crossing
    probabilities; after the split the population is simulated on a grid
    ``FINE`` times finer than ``config.h`` (default ``T/64``).
    """
    if not T > 0:
        raise NonPositiveHorizon(f"T must be positive, got {T}")
    if not u > 0:
        raise BadArguments(f"u must be positive, got {u}")
    h = T / 64 if config.h is None else float(config.h)
    m = max(int(math.ceil(T / h - 1e-9)), 1)
    times = np.linspace(0.0, T, m + 1)
    dt = times[1] - times[0]
    pad = config.kappa * math.sqrt(dt)

    def one(index, size):
        rng = substream(config.seed, index)
        sigma = rng.exponential(size=size)
        B = np.zeros((size, m + 1))
        np.cumsum(rng.standard_normal((size, m)) * math.sqrt(dt), axis=1, out=B[:, 1:])
        W = B - c * times[None, :]
        # index of the step containing sigma; m means no split before T
        k = np.minimum(np.searchsorted(times, sigma, side="right") - 1, m)
        split = sigma < T
        ks = np.minimum(k, m - 1)
        t_lo = times[ks]
        frac = np.where(split, (sigma - t_lo) / dt, 1.0)
        z = rng.standard_normal(size)
        Bs = B[np.arange(size), ks] + frac * (B[np.arange(size), ks + 1] - B[np.arange(size), ks])
        Bs += np.sqrt(np.clip(frac * (1 - frac) * dt, 0, None)) * z
        Ws = Bs - c * np.minimum(sigma, T)

        # single-particle crossing on [0, min(sigma, T)]
        step_p = _bridge_cross(W[:, :-1], W[:, 1:], u, np.full((size, m), dt))
        full = np.arange(m)[None, :] < np.where(split, k, m)[:, None]
        part = _bridge_cross(W[np.arange(size), ks], Ws, u, np.where(split, sigma - t_lo, 0.0))
        with np.errstate(divide="ignore"):
            log_stay = np.sum(np.where(full, np.log1p(-step_p), 0.0), axis=1)
            log_stay += np.where(split, np.log1p(-part), 0.0)
        stay = np.exp(log_stay)
        q1 = 1.0 - stay

        # later occurrences need the spine above the level after sigma
        after = np.arange(m + 1)[None, :] > k[:, None]
        spine_hi = np.maximum(np.where(after, W, -np.inf).max(axis=1), Ws)
        cand = np.flatnonzero(split & (spine_hi + pad > u) & (q1 < 1.0))
        e2 = np.zeros(size)
        for p in cand:
            fine_t, spine = _fine_spine(times, B[p], sigma[p], Bs[p], k[p], rng)
            e2[p] = _population_event(fine_t, spine, u, c, rng)
        return Moments.of(q1 + stay * e2)

    bs = config.batch_size or 20_000
    tot = sum(run_batches(one, config.n, bs, config.workers), Moments())
    return mc.MCEstimate(
        p=tot.mean, stderr=tot.stderr, n=tot.n, estimator="crude", seed=config.seed, event="ClassicalAllParticles", u=float(u)
    )


def _fine_spine(times, Bp, sigma, Bs, k, rng):
    """Spine values on a grid ``FINE`` times finer than ``times`` from ``sigma`` to ``T``."""
    dt = times[1] - times[0]
    fine_dt = dt / FINE
    t_pts = [sigma]
    vals = [Bs]
    # within the step that contains sigma
    t0, v0 = sigma, Bs
    for j in range(k + 1, len(times)):
        inner = np.arange(times[j - 1] + fine_dt, times[j] - 1e-12, fine_dt)
        inner = inner[inner > t0 + 1e-12]
        vals.extend(_fill(inner, t0, v0, times[j], Bp[j], rng))
        t_pts.extend(inner)
        t_pts.append(times[j])
        vals.append(Bp[j])
        t0, v0 = times[j], Bp[j]
    return np.asarray(t_pts), np.asarray(vals)
