"""Brownian decision trees: branch indexing, covariance algebra and spectrum.

A tree is fixed by its branching times ``tau``, offspring counts ``N``, drift
``c``, starting level ``x`` and horizon ``T``. Branches are labelled
``0 .. P_eta - 1``; at time ``t`` branch ``gamma`` reads component
``gamma mod P_{i(t)}`` of the active Brownian vector.
"""
from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    EqualBranches,
    IndexOutOfRange,
    InvalidOffspring,
    NonIncreasingTau,
    NonPositiveHorizon,
    TauOutOfRange,
    ValidationError,
)

__all__ = [
    "TreeSpec",
    "Eigenstructure",
    "validate",
    "digits",
    "from_digits",
    "separation_moment",
    "covariance",
    "sigma_matrix",
    "sigma_matrix_recursive",
    "eigenstructure",
    "digit_swap",
]


@dataclass(frozen=True)
class TreeSpec:
    tau: tuple[float, ...]
    N: tuple[int, ...]
    c: float = 0.0
    x: float = 0.0
    T: float = 1.0

    @property
    def eta(self) -> int:
        return len(self.tau)

    @cached_property
    def P(self) -> tuple[int, ...]:
        """Cumulative branch counts ``(P_0, ..., P_eta)`` with ``P_0 = 1``."""
        out = [1]
        for n in self.N:
            out.append(out[-1] * n)
        return tuple(out)

    @property
    def n_branches(self) -> int:
        return self.P[-1]

    @property
    def knots(self) -> tuple[float, ...]:
        """``(0, tau_1, ..., tau_eta, T)``."""
        return (0.0, *self.tau, self.T)

    def i_of_t(self, t: float) -> int:
        # i(t) = 0 for t <= tau_1 (tau_0 = 0 convention)
        i = 0
        for k, s in enumerate(self.tau, start=1):
            if t > s:
                i = k
        return i

    @cached_property
    def mu0(self) -> float:
        return eigenstructure(self.T, self).mu[0]

    def to_dict(self) -> dict:
        return {"tau": list(self.tau), "N": list(self.N), "c": self.c, "x": self.x, "T": self.T}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TreeSpec":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed tree spec JSON: {exc}") from exc
        return validate(raw)


@dataclass(frozen=True)
class Eigenstructure:
    """Distinct eigenvalues ``mu`` (decreasing) of the covariance matrix with multiplicities."""

    t: float
    mu: tuple[float, ...]
    mult: tuple[int, ...]

    def expanded(self) -> np.ndarray:
        """All eigenvalues with repetition, in decreasing order."""
        return np.repeat(np.asarray(self.mu, dtype=float), self.mult)

    def log_det(self) -> float:
        return float(sum(m * math.log(v) for v, m in zip(self.mu, self.mult)))

    def trace(self) -> float:
        return float(sum(m * v for v, m in zip(self.mu, self.mult)))

    def pairs(self) -> list[tuple[float, int]]:
        return list(zip(self.mu, self.mult))


def _as_int(value, what):
    try:
        k = operator.index(value)
    except TypeError:
        f = float(value)
        if not f.is_integer():
            raise InvalidOffspring(f"{what} must be an integer, got {value!r}") from None
        k = int(f)
    return k


def validate(raw) -> TreeSpec:
    """Check a raw spec (mapping or ``TreeSpec``) and return its canonical form.

    Branching points with a single offspring are dropped; they leave the law of
    the process unchanged.
    """
    if isinstance(raw, TreeSpec):
        raw = raw.to_dict()
    try:
        tau = [float(s) for s in raw.get("tau", [])]
        N = [_as_int(n, "offspring count") for n in raw.get("N", [])]
        c = float(raw.get("c", 0.0))
        x = float(raw.get("x", 0.0))
        T = float(raw["T"])
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError(f"malformed tree spec: {exc!r}") from exc
    if len(tau) != len(N):
        raise ValidationError(f"tau and N differ in length ({len(tau)} vs {len(N)})")
    if not all(map(math.isfinite, [*tau, c, x, T])):
        raise ValidationError("tree spec contains non-finite numbers")
    if T <= 0:
        raise NonPositiveHorizon(f"horizon T must be positive, got {T}")
    for a, b in zip(tau, tau[1:]):
        if not a < b:
            raise NonIncreasingTau(f"branching times must increase strictly: {tau}")
    if tau and (tau[0] <= 0 or tau[-1] >= T):
        raise TauOutOfRange(f"branching times must lie in (0, T={T}): {tau}")
    for n in N:
        if n <= 0:
            raise InvalidOffspring(f"offspring counts must be positive: {N}")
    kept = [(s, n) for s, n in zip(tau, N) if n != 1]
    return TreeSpec(
        tau=tuple(s for s, _ in kept), N=tuple(n for _, n in kept), c=c, x=x, T=T
    )


def _check_index(gamma, spec):
    if not 0 <= gamma < spec.n_branches:
        raise IndexOutOfRange(f"branch {gamma} outside 0..{spec.n_branches - 1}")


def digits(gamma: int, spec: TreeSpec) -> tuple[int, ...]:
    """Mixed-radix digits ``a_1..a_eta`` with ``gamma = sum a_i P_{i-1}``."""
    _check_index(gamma, spec)
    out = []
    for n in spec.N:
        gamma, a = divmod(gamma, n)
        out.append(a)
    return tuple(out)


def from_digits(a, spec: TreeSpec) -> int:
    if len(a) != spec.eta or any(not 0 <= ai < n for ai, n in zip(a, spec.N)):
        raise IndexOutOfRange(f"digits {tuple(a)} invalid for N={spec.N}")
    return sum(ai * p for ai, p in zip(a, spec.P))


def separation_moment(gamma1: int, gamma2: int, spec: TreeSpec) -> int:
    """Index of the branching point at which two distinct branches split."""
    _check_index(gamma1, spec)
    _check_index(gamma2, spec)
    if gamma1 == gamma2:
        raise EqualBranches(f"separation moment undefined for equal branches ({gamma1})")
    for n in range(1, spec.eta + 1):
        if gamma1 % spec.P[n] != gamma2 % spec.P[n]:
            return n
    raise AssertionError("unreachable: distinct branches always separate")


def _kappa_table(P, spec):
    """Separation moments between components ``0..P-1`` (zero on the diagonal)."""
    idx = np.arange(P)
    kappa = np.zeros((P, P), dtype=int)
    undecided = idx[:, None] != idx[None, :]
    for n in range(1, spec.eta + 1):
        hit = undecided & ((idx[:, None] % spec.P[n]) != (idx[None, :] % spec.P[n]))
        kappa[hit] = n
        undecided &= ~hit
    return kappa


def covariance(gamma1: int, t1: float, gamma2: int, t2: float, spec: TreeSpec) -> float:
    tmin = min(t1, t2)
    if gamma1 == gamma2:
        _check_index(gamma1, spec)
        return tmin
    k = separation_moment(gamma1, gamma2, spec)
    return min(tmin, spec.tau[k - 1])


def sigma_matrix(t: float, spec: TreeSpec) -> np.ndarray:
    """Covariance of the active Brownian vector at time ``t`` (entrywise formula)."""
    i = spec.i_of_t(t)
    P = spec.P[i]
    kappa = _kappa_table(P, spec)
    tau = np.asarray((0.0, *spec.tau))
    S = np.minimum(t, tau[kappa])
    np.fill_diagonal(S, t)
    return S


def sigma_matrix_recursive(t: float, spec: TreeSpec) -> np.ndarray:
    """Same matrix built from the block recursion over branching points."""
    i = spec.i_of_t(t)
    if i == 0:
        return np.array([[float(t)]])
    s = spec.tau[i - 1]
    inner = sigma_matrix_recursive(s, spec)
    n = spec.N[i - 1]
    return np.kron(np.ones((n, n)), inner) + (t - s) * np.eye(inner.shape[0] * n)


def eigenstructure(t: float, spec: TreeSpec) -> Eigenstructure:
    i = spec.i_of_t(t)
    tau = (0.0, *spec.tau)
    mu = []
    for v in range(i + 1):
        val = t - tau[i]
        for l in range(v + 1, i + 1):
            val += (tau[l] - tau[l - 1]) * math.prod(spec.N[l - 1 : i])
        mu.append(val)
    mult = [1] + [spec.P[v] - spec.P[v - 1] for v in range(1, i + 1)]
    return Eigenstructure(t=float(t), mu=tuple(mu), mult=tuple(mult))


def digit_swap(gamma: int, j: int, b: int, c: int, spec: TreeSpec) -> int:
    """Exchange digit values ``b`` and ``c`` in position ``j`` (1-based) of ``gamma``."""
    a = list(digits(gamma, spec))
    if a[j - 1] == b:
        a[j - 1] = c
    elif a[j - 1] == c:
        a[j - 1] = b
    return from_digits(a, spec)
