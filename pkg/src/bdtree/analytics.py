"""Closed-form exceedance asymptotics and bounds for decision trees.

Every evaluator works in log space and returns an :class:`AsymptoticsResult`
carrying both ``value`` and ``log_value``, so results far below the smallest
double (``exp(-800)`` and the like) keep their information.
"""
from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr

from .errors import (
    BadArguments,
    DegenerateTree,
    MismatchedConstant,
    NonPositiveHorizon,
    ValidationError,
    ZeroAtomProbability,
)
from .tree import TreeSpec, eigenstructure, validate

LOG_2PI = math.log(2.0 * math.pi)


def log_normal_tail(x):
    """``log P{xi > x}`` for standard normal ``xi``."""
    return log_ndtr(-np.asarray(x, dtype=float))


def normal_tail(x):
    return np.exp(log_normal_tail(x))


@dataclass(frozen=True)
class AsymptoticsResult:
    formula: str
    u: float
    log_value: float
    spec: TreeSpec | None = None
    meta: dict = field(default_factory=dict, compare=False)
    linear: float | None = field(default=None, compare=False)

    @property
    def value(self) -> float:
        # sums of terms keep their directly added value when it is representable
        if self.linear is not None:
            return self.linear
        return math.exp(self.log_value)

    def to_dict(self) -> dict:
        return {"formula": self.formula, "u": self.u, "value": self.value, "log_value": self.log_value}


def _positive_u(u):
    u = float(u)
    if not u > 0:
        raise BadArguments(f"threshold u must be positive, got {u}")
    return u


def log_bm_crossing_exact(u, c, T) -> float:
    if not T > 0:
        raise NonPositiveHorizon(f"T must be positive, got {T}")
    s = math.sqrt(T)
    a = log_normal_tail((u + c * T) / s)
    b = -2.0 * c * u + log_normal_tail((u - c * T) / s)
    return float(logsumexp([a, b]))


def bm_crossing_exact(u, c, T) -> float:
    """Probability that ``B(t) - c t`` exceeds ``u`` somewhere on ``[0, T]``."""
    return math.exp(log_bm_crossing_exact(u, c, T))


def bm_crossing_asym(u, c, T) -> AsymptoticsResult:
    """Large-``u`` form of :func:`bm_crossing_exact` (Mills-ratio leading term)."""
    u = _positive_u(u)
    v = u + c * T
    if v <= 0:
        raise BadArguments("u + cT must be positive")
    logv = math.log(2.0 * math.sqrt(T) / (math.sqrt(2 * math.pi) * v)) - v * v / (2 * T)
    return AsymptoticsResult("bm_crossing", u, logv)


def single_branch_asym(u, spec: TreeSpec) -> AsymptoticsResult:
    u = _positive_u(u)
    v = u + spec.c * spec.T
    if v <= 0:
        raise BadArguments("u + cT must be positive")
    T = spec.T
    logv = (
        math.log(spec.n_branches)
        + 0.5 * math.log(2 / math.pi)
        + 0.5 * math.log(T)
        - math.log(v)
        - v * v / (2 * T)
    )
    return AsymptoticsResult("single_branch", u, logv, spec)


def diameter_asym(u, spec: TreeSpec) -> AsymptoticsResult:
    u = _positive_u(u)
    if spec.eta == 0:
        raise DegenerateTree("a tree without branching has zero diameter")
    N1 = spec.N[0]
    span = spec.T - spec.tau[0]
    P = spec.n_branches
    logv = (
        2 * math.log(P)
        + math.log((N1 - 1) / N1)
        + math.log(2 * math.sqrt(span) / (u * math.sqrt(math.pi)))
        - u * u / (4 * span)
    )
    return AsymptoticsResult("diameter", u, logv, spec)


def endpoint_orthant_asym(u, spec: TreeSpec) -> AsymptoticsResult:
    """Leading term of ``P{all branches at T exceed u + cT}``."""
    u = _positive_u(u)
    es = eigenstructure(spec.T, spec)
    P = spec.n_branches
    mu0 = es.mu[0]
    v = u + spec.c * spec.T
    logv = (
        -P * math.log(u)
        + (P - 0.5) * math.log(mu0)
        - 0.5 * P * LOG_2PI
        - 0.5 * sum(m * math.log(mu) for mu, m in zip(es.mu[1:], es.mult[1:]))
        - v * v * P / (2 * mu0)
    )
    return AsymptoticsResult("endpoint_orthant", u, logv, spec)


def korshunov_constant(c, P_eta) -> float:
    if P_eta < 1:
        raise BadArguments(f"P_eta must be >= 1, got {P_eta}")
    tail = float(ndtr(-abs(c)))
    if tail > 1e-300:
        return tail ** (-P_eta)
    return float(np.exp(-P_eta * log_normal_tail(abs(c))))


def _unpack_constant(H, spec):
    if isinstance(H, (int, float, np.floating)):
        return float(H)
    P = spec.n_branches
    lam = 1.0 / spec.mu0
    if H.N != P or not math.isclose(H.lam, lam, rel_tol=1e-9):
        raise MismatchedConstant(
            f"constant estimated for (N={H.N}, lambda={H.lam}), tree needs (N={P}, lambda={lam})"
        )
    return float(H.value)


def all_branch_asym(u, spec: TreeSpec, H) -> AsymptoticsResult:
    """Simultaneous-exceedance asymptotics: ``H * endpoint orthant``.

    ``H`` is either a bare number or a Pickands estimate for
    ``(P_eta, 1/mu_0(T))``; the latter is checked against the tree.
    """
    h = _unpack_constant(H, spec)
    base = endpoint_orthant_asym(u, spec)
    return AsymptoticsResult(
        "all_branch", base.u, base.log_value + math.log(h), spec, {"H": h}
    )


@dataclass(frozen=True)
class RandomTreeSpec:
    """Tree whose offspring counts are independent random variables.

    ``laws`` holds one offspring law per branching point, either a mapping
    ``{count: probability}`` or a frozen ``scipy.stats`` discrete law.
    """

    tau: tuple[float, ...]
    laws: tuple
    c: float = 0.0
    x: float = 0.0
    T: float = 1.0

    def _essinf(self, law):
        if isinstance(law, Mapping):
            support = [int(k) for k, p in law.items() if p > 0]
            if not support:
                raise ZeroAtomProbability("offspring law has no positive mass")
            m = min(support)
            return m, float(law[m])
        # smallest integer carrying mass; scipy reports the support's lower edge
        m = int(law.support()[0])
        while law.cdf(m) <= 0:
            m += 1
        return m, float(law.pmf(m))

    def essinf(self) -> tuple[int, ...]:
        return tuple(self._essinf(law)[0] for law in self.laws)

    def atom_probabilities(self) -> tuple[float, ...]:
        out = []
        for law in self.laws:
            m, p = self._essinf(law)
            if not p > 0:
                raise ZeroAtomProbability(f"essential infimum {m} is not an atom")
            out.append(p)
        return tuple(out)

    def essinf_spec(self) -> TreeSpec:
        return validate(
            {"tau": list(self.tau), "N": list(self.essinf()), "c": self.c, "x": self.x, "T": self.T}
        )


def random_offspring_asym(u, rspec: RandomTreeSpec, H) -> AsymptoticsResult:
    atoms = rspec.atom_probabilities()
    base = all_branch_asym(u, rspec.essinf_spec(), H)
    return AsymptoticsResult(
        "random_offspring",
        base.u,
        base.log_value + sum(math.log(p) for p in atoms),
        base.spec,
        {"H": base.meta["H"], "atoms": atoms},
    )


def ruintime_limit(x, y, spec: TreeSpec) -> float:
    """Limit law of ``u^2 (T - first simultaneous exceedance time)`` beyond ``x``, given ``y``."""
    if not (y > 0 and x > y):
        raise BadArguments(f"need x > y > 0, got x={x}, y={y}")
    return math.exp(-(x - y) * spec.n_branches / (2 * spec.mu0**2))


def classical_bbm_asym(u, c, T, variant: str = "proof") -> AsymptoticsResult:
    """Simultaneous exceedance for classical binary BBM with unit branching rate.

    ``variant="proof"`` keeps the ``1/u`` factor of the leading no-branching
    term; ``variant="statement"`` omits it. The two differ by a factor ``u``
    and only the former matches ``exp(-T) * bm_crossing_exact``.
    """
    u = _positive_u(u)
    if not T > 0:
        raise NonPositiveHorizon(f"T must be positive, got {T}")
    logv = -T + 0.5 * math.log(2 * T / math.pi) - (u + c * T) ** 2 / (2 * T)
    if variant == "proof":
        logv -= math.log(u)
    elif variant != "statement":
        raise ValidationError(f"unknown variant {variant!r}")
    return AsymptoticsResult(
        "classical_bbm",
        u,
        logv,
        None,
        {"variant": variant, "note": "stated form lacks the 1/u factor present in the leading term"},
    )


FORMULAS = {
    "single_branch": single_branch_asym,
    "diameter": diameter_asym,
    "endpoint_orthant": endpoint_orthant_asym,
}
