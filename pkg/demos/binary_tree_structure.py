"""
Covariance structure of a binary decision tree
==============================================

A Brownian path splits in two at t=1 and every piece splits again at t=2.
Four branches are alive at T=3. This script prints the covariance matrix,
its distinct eigenvalues and the solution of the quadratic program that
governs the endpoint exceedance.
"""

import numpy as np

from bdtree import digits, eigenstructure, separation_moment, sigma_matrix, solve, validate

spec = validate({"tau": [1, 2], "N": [2, 2], "c": 0, "T": 3})
print("branches:", spec.n_branches, " cumulative counts P:", spec.P)

# branch g picks offspring digits (a_1, a_2) with g = a_1 + 2 a_2
for g in range(spec.n_branches):
    print(f"  branch {g}: digits {digits(g, spec)}")

# two branches share their path up to the branching time where they separate
print("separation of (0,1):", separation_moment(0, 1, spec), " of (0,2):", separation_moment(0, 2, spec))

S = sigma_matrix(spec.T, spec)
print("Sigma(3) =")
print(S)

es = eigenstructure(spec.T, spec)
print("distinct eigenvalues (mu, multiplicity):", es.pairs())
print("numerical eigenvalues:", np.round(np.sort(np.linalg.eigvalsh(S))[::-1], 12))

# minimize x' Sigma^-1 x over x >= 1: every constraint is active and the value is P / mu_0
sol = solve(S, np.ones(spec.n_branches))
print("active set:", sol.I, " value:", sol.value, " P/mu0:", spec.n_branches / es.mu[0])
