"""Path simulation and rare-event estimation for Brownian decision trees.

Paths are simulated exactly at grid times from the independent Brownian
components that make up the tree: on a step lying in ``(tau_i, tau_{i+1}]``
only ``P_i`` fresh increments are drawn and branch ``b`` reads component
``b mod P_i``. Levels refer to ``B(t) - c t`` measured from the starting
point of the tree.

Events between grid times are handled in two ways. For a single branch the
Brownian-bridge crossing probability of a constant level is exact and is used
directly (a Rao-Blackwellised indicator). For the vector events (all branches
above the level, or a large spread between branches) grid steps that could
contain an occurrence are bisected by sampling bridge midpoints, down to
``refine_depth`` halvings. A step is dropped once the event is out of reach:
for the all-branch event when some coordinate's bridge reaches the level with
probability below ``exp(-kappa^2)``, for the spread event when the endpoints
padded by ``kappa`` bridge standard deviations cannot be ``u`` apart.

Importance sampling adds deterministic drifts to the Brownian components and
weights by the exact Gaussian likelihood ratio, computed in log space.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from ._batch import Moments, run_batches, substream
from .analytics import normal_tail
from .errors import BadArguments, UnsupportedEvent, ValidationError
from .grid import TimeGrid, make_grid
from .tree import TreeSpec, eigenstructure


class Event(str, Enum):
    SINGLE_BRANCH = "SingleBranch"
    DIAMETER = "Diameter"
    ALL_BRANCH = "AllBranch"
    ENDPOINT_ORTHANT = "EndpointOrthant"
    FOREST_ANY = "ForestAny"


@dataclass(frozen=True)
class EventSpec:
    kind: Event
    u: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Event(self.kind))


@dataclass(frozen=True)
class MCConfig:
    n: int = 100_000
    seed: int = 0
    h: float | None = None
    window: float = 0.0
    fine_h: float | None = None
    batch_size: int | None = None
    workers: int = 1
    refine_depth: int = 12
    kappa: float = 3.0
    time_mixture: bool = True

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")


@dataclass(frozen=True)
class MCEstimate:
    p: float
    stderr: float
    n: int
    estimator: str
    seed: int
    event: str | None = None
    u: float | None = None

    def to_dict(self) -> dict:
        return {"p": self.p, "stderr": self.stderr, "n": self.n, "estimator": self.estimator, "seed": self.seed}


@dataclass(frozen=True)
class TreePath:
    """One simulated tree: ``values[k, g]`` is ``B_g(times[k])`` relative to the start."""

    times: np.ndarray
    values: np.ndarray


@dataclass
class _Layout:
    spec: TreeSpec
    grid: TimeGrid
    times: np.ndarray = field(init=False)
    dt: np.ndarray = field(init=False)
    active: np.ndarray = field(init=False)
    comp: np.ndarray = field(init=False)
    rep: np.ndarray = field(init=False)

    def __post_init__(self):
        spec = self.spec
        self.times = np.asarray(self.grid.times, dtype=float)
        self.dt = np.diff(self.times)
        P = spec.n_branches
        self.active = np.array([spec.P[spec.i_of_t(t)] for t in self.times[1:]], dtype=int)
        b = np.arange(P)
        self.comp = b[None, :] % self.active[:, None]
        self.rep = b[None, :] < self.active[:, None]

    @property
    def P(self) -> int:
        return self.spec.n_branches

    @property
    def m(self) -> int:
        return len(self.dt)

    def rep_mask(self, branches=None) -> np.ndarray:
        """Per step, one representative branch per distinct component among ``branches``."""
        if branches is None:
            return self.rep
        sel = np.zeros(self.P, dtype=bool)
        sel[list(branches)] = True
        mask = np.zeros_like(self.rep)
        for s in range(self.m):
            seen = set()
            for g in np.flatnonzero(sel):
                k = g % self.active[s]
                if k not in seen:
                    seen.add(k)
                    mask[s, g] = True
        return mask


def _layout(spec, config, u=None):
    grid = make_grid(spec, config.h, config.window, config.fine_h)
    return _Layout(spec, grid)


def _blocks(lay: _Layout):
    """Maximal runs of steps sharing the same number of active components."""
    edges = np.flatnonzero(np.diff(lay.active)) + 1
    starts = np.r_[0, edges]
    stops = np.r_[edges, lay.m]
    return list(zip(starts.tolist(), stops.tolist()))


def _simulate(lay: _Layout, n: int, rng, drift=None, mode=None) -> np.ndarray:
    """Driftless-or-tilted branch values ``B`` with shape ``(n, m+1, P)``."""
    B = np.empty((n, lay.m + 1, lay.P))
    B[:, 0, :] = 0.0
    for s0, s1 in _blocks(lay):
        k = lay.active[s0]
        z = rng.standard_normal((n, s1 - s0, k))
        z *= np.sqrt(lay.dt[s0:s1])[None, :, None]
        inc = z[:, :, lay.comp[s0]] if k < lay.P else z
        if drift is not None:
            D = drift[:, s0:s1, :] * lay.dt[None, s0:s1, None]
            inc = inc + (D[0][None] if D.shape[0] == 1 else D[mode])
        np.cumsum(inc, axis=1, out=B[:, s0 + 1 : s1 + 1, :])
        B[:, s0 + 1 : s1 + 1, :] += B[:, s0 : s0 + 1, :]
    return B


def _log_tilt_densities(lay: _Layout, B, drift) -> np.ndarray:
    """``log dQ_k/dP`` of every tilt ``k`` in ``drift`` evaluated on paths ``B``."""
    dB = np.diff(B, axis=1)
    D = drift * lay.rep[None, :, :]
    lin = np.einsum("nsb,ksb->nk", dB, D)
    quad = 0.5 * np.einsum("ksb,s->k", D * D, lay.dt)
    return lin - quad[None, :]


# offsets u^2 (T - s) of the target times used by the time-mixture tilts, in units
# of the mean of the limiting law of u^2 (T - first passage)
MIXTURE_OFFSETS = (0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0)


def _target_index(lay, s):
    return int(np.argmin(np.abs(lay.times - s)))


def _mixture_times(lay, u, scale, floor):
    """Distinct grid times ``T - scale * q / u^2`` not earlier than ``floor``."""
    T = lay.spec.T
    ks = []
    for q in MIXTURE_OFFSETS:
        s = max(T - scale * q / (u * u), floor)
        k = _target_index(lay, s)
        if lay.times[k] < floor - 1e-12:
            k += 1
        if k not in ks and k > 0:
            ks.append(k)
    return ks


def _all_branch_table(lay, u, k):
    """Drift making every branch's mean equal ``u + c s`` at ``s = times[k]``, then none."""
    spec = lay.spec
    s = lay.times[k]
    i = spec.i_of_t(s)
    mu0 = eigenstructure(s, spec).mu[0]
    rates = spec.P[i] / lay.active * (u + spec.c * s) / mu0
    rates[k:] = 0.0
    return np.repeat(rates[:, None], lay.P, axis=1)


def all_branch_drift(lay: _Layout, u: float, mixture: bool = False) -> np.ndarray:
    """Drift tables for the all-branch tilt.

    The terminal table is the conditional-mean path given ``W(T) = u``: each
    component alive on ``(tau_i, tau_{i+1}]`` carries ``P_eta / P_i`` leaves and
    drifts at ``(P_eta / P_i) (u + cT) / mu_0(T)``. With ``mixture`` the same
    construction is repeated for target times slightly before ``T`` so that
    paths which exceed early and then fall back keep bounded weights.
    """
    spec = lay.spec
    if not mixture:
        return _all_branch_table(lay, u, lay.m)[None]
    floor = spec.tau[-1] if spec.tau else 0.0
    ks = _mixture_times(lay, u, 2 * spec.mu0**2 / spec.n_branches, floor)
    return np.stack([_all_branch_table(lay, u, k) for k in ks])


def single_branch_drift(lay: _Layout, u: float, branches=None, mixture: bool = False) -> np.ndarray:
    """Tables moving one branch's mean to ``u + c s`` at a target time ``s``.

    Only the components on that branch's path carry drift. One table per
    branch (and per target time when ``mixture`` is set).
    """
    spec = lay.spec
    branches = range(lay.P) if branches is None else branches
    ks = _mixture_times(lay, u, 2 * spec.T**2, 0.0) if mixture else [lay.m]
    out = []
    for g in branches:
        on_path = lay.comp == (g % lay.active)[:, None]
        for k in ks:
            s = lay.times[k]
            D = (u + spec.c * s) / s * on_path
            D[k:] = 0.0
            out.append(D)
    return np.asarray(out, dtype=float)


def _mixture_weight(lay, B, drift):
    """``dP/dQ`` for the equal-weight mixture of the tilts in ``drift``."""
    logq = _log_tilt_densities(lay, B, drift)
    return np.exp(-(logsumexp(logq, axis=1) - math.log(drift.shape[0])))


# -- events ----------------------------------------------------------------


def _single_branch_prob(lay, W, u, branches=None):
    """Conditional probability, given grid values, that some branch crosses ``u``."""
    mask = lay.rep_mask(branches)
    cols = slice(None) if branches is None else list(branches)
    hit = (W[:, :, cols] > u).any(axis=(1, 2))
    da = u - W[:, :-1, :]
    db = u - W[:, 1:, :]
    with np.errstate(over="ignore", invalid="ignore"):
        p = np.exp(-2.0 * np.clip(da, 0, None) * np.clip(db, 0, None) / lay.dt[None, :, None])
    p = np.where(mask[None], p, 0.0)
    with np.errstate(divide="ignore"):
        log_stay = np.log1p(-np.minimum(p, 1.0)).sum(axis=(1, 2))
    return np.where(hit, 1.0, -np.expm1(log_stay))


def _refine(lay, rng, owner, s_idx, left, right, possible, hit, best, depth):
    """Bisect candidate steps by Brownian-bridge midpoints; update earliest hits in ``best``."""
    P = lay.P
    t0 = lay.times[s_idx]
    dt = lay.dt[s_idx]
    active = lay.active[s_idx]
    cols = np.arange(P)
    for _ in range(depth):
        if not len(owner):
            break
        z = rng.standard_normal((len(owner), P))
        if (active < P).any():
            z = np.take_along_axis(z, cols[None, :] % active[:, None], axis=1)
        half = 0.5 * dt
        z *= np.sqrt(0.5 * half)[:, None]
        mid = left + right
        mid *= 0.5
        mid += z
        tm = t0 + half
        h = hit(mid)
        if h.any():
            np.minimum.at(best, owner[h], tm[h])
        limit = best[owner]
        il = np.flatnonzero(possible(left, mid, half) & (t0 < limit))
        ir = np.flatnonzero(possible(mid, right, half) & (tm < limit))
        left = np.concatenate([left[il], mid[ir]])
        right = np.concatenate([mid[il], right[ir]])
        t0 = np.concatenate([t0[il], tm[ir]])
        dt = np.concatenate([half[il], half[ir]])
        active = np.concatenate([active[il], active[ir]])
        owner = np.concatenate([owner[il], owner[ir]])
    return best


def _lastmin(X):
    # column-wise reduction: much faster than ``min(axis=-1)`` on a short last axis
    return functools.reduce(np.minimum, (X[..., b] for b in range(X.shape[-1])))


def _lastmax(X):
    return functools.reduce(np.maximum, (X[..., b] for b in range(X.shape[-1])))


def _bounds(left, right, dt, kappa):
    pad = kappa * np.sqrt(dt)[..., None]
    return np.maximum(left, right) + pad, np.minimum(left, right) - pad


def _first_hit(lay, W, hit, possible, rng, depth):
    """Earliest grid-or-refined time at which ``hit`` holds (``inf`` if never)."""
    n = W.shape[0]
    coarse = hit(W.reshape(-1, lay.P)).reshape(n, lay.m + 1)
    has = coarse.any(axis=1)
    first = np.where(has, coarse.argmax(axis=1), lay.m + 1)
    best = np.where(has, lay.times[np.minimum(first, lay.m)], np.inf)
    if depth <= 0:
        return best
    L, R = W[:, :-1, :], W[:, 1:, :]
    cand = possible(L, R, lay.dt[None, :]) & (np.arange(lay.m)[None, :] < first[:, None])
    owner, s_idx = np.nonzero(cand)
    return _refine(lay, rng, owner, s_idx, L[owner, s_idx], R[owner, s_idx], possible, hit, best, depth)


def _all_branch_time(lay, W, u, rng, config):
    kappa = config.kappa

    def hit(X):
        return _lastmin(X) > u

    # every coordinate's bridge must be able to reach u: P{max > u} = exp(-2 (u-l)(u-r)/dt)
    def possible(L, R, dt):
        gap = np.maximum(u - L, 0.0)
        gap *= np.maximum(u - R, 0.0)
        return _lastmax(gap) < 0.5 * kappa**2 * dt

    return _first_hit(lay, W, hit, possible, rng, config.refine_depth)


def _diameter_time(lay, W, u, rng, config):
    kappa = config.kappa

    def hit(X):
        return _lastmax(X) - _lastmin(X) > u

    def possible(L, R, dt):
        pad = kappa * np.sqrt(dt)
        return _lastmax(np.maximum(L, R)) - _lastmin(np.minimum(L, R)) + 2 * pad > u

    return _first_hit(lay, W, hit, possible, rng, config.refine_depth)


def _event_values(lay, B, kind, u, rng, config, branches=None):
    W = B - lay.spec.c * lay.times[None, :, None]
    if kind is Event.ENDPOINT_ORTHANT:
        return (W[:, -1, :] > u).all(axis=1).astype(float)
    if kind is Event.SINGLE_BRANCH:
        return _single_branch_prob(lay, W, u, branches)
    if kind is Event.ALL_BRANCH:
        return np.isfinite(_all_branch_time(lay, W, u, rng, config)).astype(float)
    if kind is Event.DIAMETER:
        return np.isfinite(_diameter_time(lay, W, u, rng, config)).astype(float)
    raise UnsupportedEvent(f"event {kind} is not a single-tree event")


# -- public API --------------------------------------------------------------


def sample_path(spec: TreeSpec, grid: TimeGrid, rng) -> TreePath:
    lay = _Layout(spec, grid)
    B = _simulate(lay, 1, rng)
    return TreePath(times=lay.times.copy(), values=B[0])


def detect(path: TreePath, event: EventSpec, spec: TreeSpec, rng=None, config: MCConfig | None = None) -> bool:
    """Indicator of ``event`` for one simulated path.

    Without ``rng`` the event is read off the grid alone. With ``rng`` a single
    branch event also counts bridge crossings between grid times (drawn with
    their exact conditional probability) and vector events are refined.
    """
    config = config or MCConfig(n=1)
    lay = _Layout(spec, TimeGrid(times=np.asarray(path.times), h=float(np.diff(path.times).max())))
    B = np.asarray(path.values, dtype=float)[None]
    W = B - spec.c * lay.times[None, :, None]
    u = event.u
    kind = event.kind
    if kind is Event.ENDPOINT_ORTHANT:
        return bool((W[0, -1] > u).all())
    if kind is Event.SINGLE_BRANCH:
        if rng is None:
            return bool((W > u).any())
        return bool(rng.random() < _single_branch_prob(lay, W, u)[0])
    depth = config.refine_depth if rng is not None else 0
    cfg = replace(config, refine_depth=depth)
    if kind is Event.ALL_BRANCH:
        return bool(np.isfinite(_all_branch_time(lay, W, u, rng, cfg))[0])
    if kind is Event.DIAMETER:
        return bool(np.isfinite(_diameter_time(lay, W, u, rng, cfg))[0])
    raise UnsupportedEvent(f"event {kind} needs a forest")


def _batch_size(config, lay):
    if config.batch_size:
        return int(config.batch_size)
    return int(max(1000, min(50_000, 4_000_000 // ((lay.m + 1) * lay.P))))


def _tilt_setup(lay, kind, u, branch, mixture):
    if kind is Event.ENDPOINT_ORTHANT:
        return all_branch_drift(lay, u)
    if kind is Event.ALL_BRANCH:
        return all_branch_drift(lay, u, mixture)
    if kind is Event.SINGLE_BRANCH:
        return single_branch_drift(lay, u, None if branch is None else [branch], mixture)
    raise UnsupportedEvent(f"no importance sampler for {kind.value}")


def _run(spec, kind, u, config, tilted, branch=None, branches=None):
    kind = Event(kind)
    lay = _layout(spec, config)
    drift = _tilt_setup(lay, kind, u, branch, config.time_mixture) if tilted else None
    K = 0 if drift is None else drift.shape[0]

    def one(index, size):
        rng = substream(config.seed, index)
        mode = rng.integers(K, size=size) if K > 1 else np.zeros(size, dtype=int)
        B = _simulate(lay, size, rng, drift, mode)
        vals = _event_values(lay, B, kind, u, rng, config, branches)
        if drift is not None:
            vals = vals * _mixture_weight(lay, B, drift)
        return Moments.of(vals)

    parts = run_batches(one, config.n, _batch_size(config, lay), config.workers)
    tot = sum(parts, Moments())
    return MCEstimate(
        p=tot.mean,
        stderr=tot.stderr,
        n=tot.n,
        estimator="tilted" if tilted else "crude",
        seed=config.seed,
        event=kind.value,
        u=float(u),
    )


def estimate(spec: TreeSpec, event, u: float, config: MCConfig) -> MCEstimate:
    """Crude Monte Carlo estimate of a single-tree event at level ``u``."""
    return _run(spec, event, u, config, tilted=False)


def estimate_tilted(spec: TreeSpec, event, u: float, config: MCConfig, branch: int | None = None) -> MCEstimate:
    """Importance-sampled estimate.

    All-branch and endpoint events drift every component so that all branches
    end at mean ``u`` (after the ``-cT`` trend). The single-branch event uses an
    equal-weight mixture of per-branch tilts, or only ``branch`` if given.
    """
    return _run(spec, event, u, config, tilted=True, branch=branch)


def estimate_branch(spec: TreeSpec, gamma: int, u: float, config: MCConfig, tilted: bool = True) -> MCEstimate:
    """Crossing probability of the single branch ``gamma``."""
    return _run(spec, Event.SINGLE_BRANCH, u, config, tilted, branch=gamma if tilted else None, branches=[gamma])


def first_passage_times(spec: TreeSpec, u: float, config: MCConfig, tilted: bool = True):
    """First simultaneous exceedance times (``inf`` if none) and likelihood weights."""
    lay = _layout(spec, config)
    drift = all_branch_drift(lay, u, config.time_mixture) if tilted else None
    K = 0 if drift is None else drift.shape[0]

    def one(index, size):
        rng = substream(config.seed, index)
        mode = rng.integers(K, size=size) if K > 1 else np.zeros(size, dtype=int)
        B = _simulate(lay, size, rng, drift, mode)
        W = B - spec.c * lay.times[None, :, None]
        t = _all_branch_time(lay, W, u, rng, config)
        w = _mixture_weight(lay, B, drift) if tilted else np.ones(size)
        return t, w

    parts = run_batches(one, config.n, _batch_size(config, lay), config.workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def ruintime_tail(spec: TreeSpec, u: float, y: float, xs, config: MCConfig, tilted: bool = True):
    """Empirical ``P{u^2 (T - tau_u) >= x | tau_u <= T - y/u^2}`` for each ``x`` in ``xs``.

    Returns ``(tails, stderrs, n_conditioning)``; stderrs use the delta method
    for a ratio of weighted sums.
    """
    if not y > 0 or any(x <= y for x in xs):
        raise BadArguments("need x > y > 0")
    t, w = first_passage_times(spec, u, config, tilted)
    s = u * u * (spec.T - t)
    cond = np.where(s >= y, w, 0.0)
    den = cond.sum()
    tails, errs = [], []
    for x in xs:
        num_i = np.where(s >= x, w, 0.0)
        r = num_i.sum() / den
        resid = num_i - r * cond
        errs.append(float(np.sqrt(np.sum(resid**2)) / den))
        tails.append(float(r))
    return np.array(tails), np.array(errs), int((s >= y).sum())


def exact_bivariate_orthant(rho: float, h: float) -> float:
    """``P{X1 > h, X2 > h}`` for standard normals with correlation ``rho``."""
    if not abs(rho) < 1:
        raise BadArguments(f"|rho| must be < 1, got {rho}")
    s = math.sqrt(1.0 - rho * rho)

    def f(x):
        return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi) * float(normal_tail((h - rho * x) / s))

    # integrate on a shifted variable so the mass sits near zero for large h
    val, _ = integrate.quad(lambda y: f(h + y), 0.0, np.inf, epsabs=1e-15, epsrel=1e-12, limit=200)
    return float(val)
