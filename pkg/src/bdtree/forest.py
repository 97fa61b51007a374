"""Families of independent decision trees sharing a horizon.

Trees are ranked by the key ``(mu_0(T)/P, x - cT, -P)`` compared
lexicographically; the largest trees dominate the probability that some tree
has all of its branches above ``u`` at a common time.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from . import mc
from ._batch import Moments, run_batches, substream
from .analytics import AsymptoticsResult, all_branch_asym, endpoint_orthant_asym
from .errors import BadArguments, MismatchedHorizon, ValidationError
from .tree import TreeSpec, validate


class Order(str, Enum):
    GREATER = "Greater"
    LESS = "Less"
    EQUIVALENT = "Equivalent"


@dataclass(frozen=True)
class ForestSpec:
    trees: tuple[TreeSpec, ...]
    T: float

    def __post_init__(self):
        if not self.trees:
            raise ValidationError("a forest needs at least one tree")
        for t in self.trees:
            if t.T != self.T:
                raise MismatchedHorizon(f"tree horizon {t.T} differs from forest horizon {self.T}")

    @property
    def M(self) -> int:
        return len(self.trees)

    @classmethod
    def from_dict(cls, raw) -> "ForestSpec":
        try:
            T = float(raw["T"])
            items = list(raw["trees"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed forest spec: {exc!r}") from exc
        trees = []
        for item in items:
            item = dict(item)
            if "T" in item and float(item["T"]) != T:
                raise MismatchedHorizon(f"tree horizon {item['T']} differs from forest horizon {T}")
            item["T"] = T
            trees.append(validate(item))
        return cls(tuple(trees), T)

    @classmethod
    def from_json(cls, text: str) -> "ForestSpec":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed forest spec JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {"T": self.T, "trees": [{k: v for k, v in t.to_dict().items() if k != "T"} for t in self.trees]}


def _exact(v):
    f = Fraction(v).limit_denominator(10**6)
    return f if float(f) == v else None


@dataclass(frozen=True)
class OrderKey:
    """``(mu_0(T)/P, x - cT, -P)``; exact rationals when every input is a short fraction."""

    ratio: Fraction | float
    level: Fraction | float
    neg_P: int
    exact: bool

    @classmethod
    def of(cls, spec: TreeSpec) -> "OrderKey":
        P = spec.n_branches
        vals = [_exact(v) for v in (*spec.tau, spec.T, spec.c, spec.x)]
        if all(v is not None for v in vals):
            *tau, T, c, x = vals
            knots = [Fraction(0), *tau]
            mu0 = T - knots[-1]
            for l in range(1, len(knots)):
                mu0 += (knots[l] - knots[l - 1]) * math.prod(spec.N[l - 1 :])
            return cls(mu0 / P, x - c * T, -P, True)
        return cls(spec.mu0 / P, spec.x - spec.c * spec.T, -P, False)

    def astuple(self, exact: bool):
        if exact:
            return (self.ratio, self.level, self.neg_P)
        return (float(self.ratio), float(self.level), self.neg_P)


def compare(tree1: TreeSpec, tree2: TreeSpec) -> Order:
    if tree1.T != tree2.T:
        raise MismatchedHorizon(f"horizons differ: {tree1.T} vs {tree2.T}")
    k1, k2 = OrderKey.of(tree1), OrderKey.of(tree2)
    exact = k1.exact and k2.exact
    a, b = k1.astuple(exact), k2.astuple(exact)
    if a > b:
        return Order.GREATER
    if a < b:
        return Order.LESS
    return Order.EQUIVALENT


def maximal_set(forest: ForestSpec) -> tuple[int, ...]:
    """Zero-based indices of the trees equivalent to a maximal one."""
    best = 0
    for i in range(1, forest.M):
        if compare(forest.trees[i], forest.trees[best]) is Order.GREATER:
            best = i
    return tuple(i for i, t in enumerate(forest.trees) if compare(t, forest.trees[best]) is Order.EQUIVALENT)


def _shifted(tree: TreeSpec) -> TreeSpec:
    return TreeSpec(tree.tau, tree.N, tree.c, 0.0, tree.T)


def forest_asym(u, forest: ForestSpec, H_per_tree) -> AsymptoticsResult:
    """Sum of the all-branch asymptotics of the maximal trees at thresholds ``u - x_i``.

    ``H_per_tree`` maps tree index to its constant (a number or a Pickands
    estimate); a sequence aligned with the trees also works. Only members of
    the maximal set are read.
    """
    A = maximal_set(forest)
    logs, terms = [], []
    for i in A:
        tree = forest.trees[i]
        try:
            H = H_per_tree[i]
        except (KeyError, IndexError) as exc:
            raise BadArguments(f"no constant given for maximal tree {i}") from exc
        r = all_branch_asym(u - tree.x, _shifted(tree), H)
        logs.append(r.log_value)
        terms.append(r.value)
    total = math.fsum(terms)
    return AsymptoticsResult("forest", float(u), float(logsumexp(logs)), None, {"A": A}, total if total > 0 else None)


def simulate_forest_event(forest: ForestSpec, u: float, config: mc.MCConfig, tilted: bool = False) -> mc.MCEstimate:
    """Estimate ``P{some tree i has B_j(t) - c_i t > u - x_i for all of its branches j}``.

    Trees are simulated independently, each on its own substream. The tilted
    version samples one tree (chosen with probability proportional to its
    endpoint asymptotics) under its all-branch tilt and leaves the others
    untouched; weights are the exact mixture likelihood ratios.
    """
    lays = [mc._layout(t, config) for t in forest.trees]
    levels = [u - t.x for t in forest.trees]
    drifts, pi = None, None
    if tilted:
        drifts = [mc.all_branch_drift(lay, lv, config.time_mixture) for lay, lv in zip(lays, levels)]
        # one extra all-zero table per tree for the untilted trees
        drifts = [np.concatenate([d, np.zeros_like(d[:1])]) for d in drifts]
        lw = np.array([endpoint_orthant_asym(lv, _shifted(t)).log_value for t, lv in zip(forest.trees, levels)])
        pi = np.exp(lw - logsumexp(lw))
    size_hint = max(mc._batch_size(config, lay) for lay in lays)

    def one(index, size):
        hit = np.zeros(size, dtype=bool)
        chosen = substream(config.seed, index, forest.M).choice(forest.M, size=size, p=pi) if tilted else None
        log_terms = []
        for i, (tree, lay, lv) in enumerate(zip(forest.trees, lays, levels)):
            rng = substream(config.seed, index, i)
            if tilted:
                K = drifts[i].shape[0] - 1
                mode = np.where(chosen == i, rng.integers(K, size=size), K)
                B = mc._simulate(lay, size, rng, drifts[i], mode)
                logq = mc._log_tilt_densities(lay, B, drifts[i][:K])
                log_terms.append(math.log(pi[i]) + logsumexp(logq, axis=1) - math.log(K))
            else:
                B = mc._simulate(lay, size, rng)
            W = B - tree.c * lay.times[None, :, None]
            hit |= np.isfinite(mc._all_branch_time(lay, W, lv, rng, config))
        vals = hit.astype(float)
        if tilted:
            vals *= np.exp(-logsumexp(np.stack(log_terms), axis=0))
        return Moments.of(vals)

    tot = sum(run_batches(one, config.n, size_hint, config.workers), Moments())
    return mc.MCEstimate(
        p=tot.mean,
        stderr=tot.stderr,
        n=tot.n,
        estimator="tilted" if tilted else "crude",
        seed=config.seed,
        event=mc.Event.FOREST_ANY.value,
        u=float(u),
    )
