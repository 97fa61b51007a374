"""Minimise ``x' Sigma^{-1} x`` subject to ``x >= a``.

The solution has a unique active set ``I`` on which ``x = a``; the remaining
coordinates are the Gaussian conditional mean given ``x_I = a_I`` and the
multiplier ``lambda = Sigma^{-1} x`` vanishes off ``I``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import AllNonpositiveConstraint, NotPositiveDefinite, NumericalError

TIE_TOL = 1e-12


@dataclass(frozen=True)
class QPSolution:
    a_tilde: np.ndarray
    I: tuple[int, ...]
    J: tuple[int, ...]
    lam: np.ndarray
    value: float
    iterations: int = 0


def _check_sigma(Sigma):
    S = np.array(Sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NotPositiveDefinite(f"Sigma must be square, got shape {S.shape}")
    if not np.allclose(S, S.T, rtol=1e-12, atol=1e-12 * np.abs(S).max()):
        raise NotPositiveDefinite("Sigma is not symmetric")
    try:
        cf = cho_factor(S)
    except LinAlgError as exc:
        raise NotPositiveDefinite("Sigma is not positive definite") from exc
    return S, cf


def conditional_completion(Sigma, a, I):
    """``x`` with ``x_I = a_I`` and ``x_J = Sigma_JI Sigma_II^{-1} a_I``."""
    Sigma = np.asarray(Sigma, dtype=float)
    a = np.asarray(a, dtype=float)
    d = len(a)
    I = np.asarray(sorted(I), dtype=int)
    J = np.setdiff1d(np.arange(d), I)
    x = np.empty(d)
    x[I] = a[I]
    if len(J):
        w = np.linalg.solve(Sigma[np.ix_(I, I)], a[I])
        x[J] = Sigma[np.ix_(J, I)] @ w
    return x


def solve(Sigma, a, max_iter: int | None = None) -> QPSolution:
    """Primal active-set method started from the full working set ``I = {0..d-1}``.

    ``x = a`` is feasible, so every iterate stays feasible. Each round either
    drops the index with the most negative multiplier or walks towards the
    minimiser on the current free set until a bound blocks.
    """
    S, cf = _check_sigma(Sigma)
    a = np.asarray(a, dtype=float).ravel()
    d = S.shape[0]
    if a.shape != (d,):
        raise NotPositiveDefinite(f"a has shape {a.shape}, Sigma is {d}x{d}")
    if np.all(a <= 0):
        raise AllNonpositiveConstraint("all constraint levels are nonpositive")
    max_iter = max_iter or 10 * d + 10

    x = a.copy()
    W = np.ones(d, dtype=bool)
    scale = max(np.abs(a).max(), 1.0)
    for it in range(1, max_iter + 1):
        target = conditional_completion(S, x, np.flatnonzero(W)) if W.any() else np.zeros(d)
        step = target - x
        if np.abs(step).max() <= 1e-14 * scale:
            lam = cho_solve(cf, x)
            lam_w = np.where(W, lam, np.inf)
            k = int(np.argmin(lam_w))
            if lam_w[k] > TIE_TOL * scale / S.diagonal().max():
                break
            W[k] = False
            continue
        # largest feasible fraction of the step; only free coordinates move
        blocking = (~W) & (step < 0)
        alpha, k = 1.0, -1
        if blocking.any():
            ratios = np.full(d, np.inf)
            ratios[blocking] = (a[blocking] - x[blocking]) / step[blocking]
            k = int(np.argmin(ratios))
            if ratios[k] < 1.0:
                alpha = max(ratios[k], 0.0)
            else:
                k = -1
        x = x + alpha * step
        if k >= 0:
            x[k] = a[k]
            W[k] = True
    else:
        raise NumericalError(f"active-set iteration did not converge in {max_iter} rounds")

    lam = cho_solve(cf, x)
    I = tuple(int(i) for i in np.flatnonzero(W))
    J = tuple(int(j) for j in np.flatnonzero(~W))
    lam[list(J)] = 0.0
    x[list(I)] = a[list(I)]
    value = float(x @ cho_solve(cf, x))
    return QPSolution(a_tilde=x, I=I, J=J, lam=lam, value=value, iterations=it)


def verify(Sigma, a, sol: QPSolution, tol: float = 1e-9) -> dict[str, bool]:
    """Check the optimality conditions of a candidate solution, one flag per condition."""
    S = np.asarray(Sigma, dtype=float)
    a = np.asarray(a, dtype=float)
    x = np.asarray(sol.a_tilde, dtype=float)
    I = list(sol.I)
    J = list(sol.J)
    d = len(a)
    report = {}
    report["partition"] = sorted(I + J) == list(range(d)) and len(I) > 0
    report["active_equal"] = bool(np.allclose(x[I], a[I], atol=tol, rtol=0))
    report["feasible"] = bool(np.all(x[J] >= a[J] - tol)) if J else True
    if I:
        SII = S[np.ix_(I, I)]
        lam_I = np.linalg.solve(SII, a[I])
        report["multipliers_positive"] = bool(np.all(lam_I > tol))
        comp = conditional_completion(S, a, I)
        report["completion"] = bool(np.allclose(x[J], comp[J], atol=tol, rtol=tol)) if J else True
        vI = float(a[I] @ lam_I)
    else:
        report["multipliers_positive"] = False
        report["completion"] = False
        vI = float("nan")
    lam = np.linalg.solve(S, x)
    report["lambda_consistent"] = bool(
        np.allclose(lam[J], 0.0, atol=tol) and np.allclose(lam[I], sol.lam[I], atol=tol, rtol=tol)
    )
    v1 = float(x @ lam)
    v2 = float(a @ lam)
    report["value_identity"] = bool(
        np.isclose(v1, sol.value, atol=tol, rtol=tol)
        and np.isclose(v2, v1, atol=tol, rtol=tol)
        and np.isclose(vI, v1, atol=tol, rtol=tol)
        and v1 > 0
    )
    return report
