import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdtree import (
    TreeSpec,
    covariance,
    digit_swap,
    digits,
    eigenstructure,
    from_digits,
    separation_moment,
    sigma_matrix,
    sigma_matrix_recursive,
    validate,
)
from bdtree.errors import EqualBranches, IndexOutOfRange, InvalidOffspring, NonIncreasingTau, TauOutOfRange
from bdtree.grid import make_grid
from bdtree.mc import _Layout, _simulate


@st.composite
def specs(draw, max_eta=3, max_P=24):
    eta = draw(st.integers(0, max_eta))
    T = draw(st.floats(0.5, 5.0))
    cuts = sorted(draw(st.lists(st.floats(0.02, 0.98), min_size=eta, max_size=eta, unique=True)))
    N, P = [], 1
    for _ in range(eta):
        k = draw(st.integers(2, 3))
        if P * k > max_P:
            k = 2 if P * 2 <= max_P else None
        if k is None:
            break
        N.append(k)
        P *= k
    tau = [T * q for q in cuts[: len(N)]]
    c = draw(st.floats(-1, 1))
    return validate({"tau": tau, "N": N, "c": c, "T": T})


def test_validate_examples():
    s = validate({"tau": [1, 2], "N": [2, 2], "c": 0, "T": 3})
    assert s.P == (1, 2, 4)
    with pytest.raises(NonIncreasingTau):
        validate({"tau": [2, 1], "N": [2, 2], "c": 0, "T": 3})
    s = validate({"tau": [1, 2], "N": [2, 1], "c": 0, "T": 3})
    assert s.tau == (1.0,) and s.N == (2,)
    with pytest.raises(TauOutOfRange):
        validate({"tau": [1, 3], "N": [2, 2], "T": 3})
    with pytest.raises(TauOutOfRange):
        validate({"tau": [0, 1], "N": [2, 2], "T": 3})
    with pytest.raises(InvalidOffspring):
        validate({"tau": [1], "N": [0], "T": 3})


def test_json_roundtrip(binary3):
    assert TreeSpec.from_json(binary3.to_json()) == binary3


def test_digits_examples(binary3):
    assert digits(0, binary3) == (0, 0)
    assert digits(3, binary3) == (1, 1)
    s = validate({"tau": [1, 2], "N": [3, 2], "T": 3})
    assert digits(5, s) == (2, 1)
    with pytest.raises(IndexOutOfRange):
        digits(4, binary3)


@given(specs(), st.data())
def test_digits_roundtrip(spec, data):
    g = data.draw(st.integers(0, spec.n_branches - 1))
    assert from_digits(digits(g, spec), spec) == g


def test_separation_examples(binary3):
    assert separation_moment(0, 1, binary3) == 1
    assert separation_moment(0, 2, binary3) == 2
    assert separation_moment(2, 0, binary3) == 2
    with pytest.raises(EqualBranches):
        separation_moment(1, 1, binary3)


def test_covariance_examples(binary3):
    assert covariance(0, 1.5, 0, 2.5, binary3) == 1.5
    assert covariance(0, 1.5, 2, 2.5, binary3) == 1.5
    assert covariance(0, 2.5, 1, 2.5, binary3) == 1.0


@given(specs(), st.data())
def test_covariance_symmetric(spec, data):
    P = spec.n_branches
    g1, g2 = data.draw(st.integers(0, P - 1)), data.draw(st.integers(0, P - 1))
    t1, t2 = data.draw(st.floats(0, spec.T)), data.draw(st.floats(0, spec.T))
    assert covariance(g1, t1, g2, t2, spec) == covariance(g2, t2, g1, t1, spec)


def test_sigma_examples(binary3):
    np.testing.assert_array_equal(sigma_matrix(0.5, binary3), [[0.5]])
    expected = [[3, 1, 2, 1], [1, 3, 1, 2], [2, 1, 3, 1], [1, 2, 1, 3]]
    np.testing.assert_array_equal(sigma_matrix(3, binary3), expected)
    np.testing.assert_array_equal(sigma_matrix_recursive(3, binary3), expected)


def test_eigen_examples(binary3):
    es = eigenstructure(3, binary3)
    assert es.pairs() == [(7.0, 1), (3.0, 1), (1.0, 2)]
    assert eigenstructure(0.7, binary3).pairs() == [(0.7, 1)]


@settings(max_examples=60, deadline=None)
@given(specs(), st.data())
def test_eigen_matches_numerics(spec, data):
    t = data.draw(st.floats(0.01, 1.0)) * spec.T
    S = sigma_matrix(t, spec)
    np.testing.assert_allclose(S, sigma_matrix_recursive(t, spec), atol=1e-12)
    es = eigenstructure(t, spec)
    analytic = np.sort(es.expanded())
    np.testing.assert_allclose(analytic, np.sort(np.linalg.eigvalsh(S)), atol=1e-10)
    assert analytic.size == S.shape[0]
    assert np.linalg.eigvalsh(S).min() > -1e-12
    assert es.mu[-1] > 0


@settings(max_examples=40, deadline=None)
@given(specs(), st.data())
def test_digit_swap_symmetry(spec, data):
    if spec.eta == 0:
        return
    j = data.draw(st.integers(1, spec.eta))
    b = data.draw(st.integers(0, spec.N[j - 1] - 1))
    c = data.draw(st.integers(0, spec.N[j - 1] - 1))
    P = spec.n_branches
    perm = np.array([digit_swap(g, j, b, c, spec) for g in range(P)])
    assert sorted(perm) == list(range(P))
    S = sigma_matrix(spec.T, spec)
    np.testing.assert_array_equal(S[np.ix_(perm, perm)], S)
    for g1, g2 in itertools.combinations(range(P), 2):
        assert separation_moment(perm[g1], perm[g2], spec) == separation_moment(g1, g2, spec)


def test_empirical_covariance(binary3):
    rng = np.random.default_rng(11)
    lay = _Layout(binary3, make_grid(binary3, h=0.25))
    n = 200_000
    B = _simulate(lay, n, rng)
    times = lay.times
    for _ in range(6):
        k1, k2 = rng.integers(1, len(times), size=2)
        g1, g2 = rng.integers(0, 4, size=2)
        prod = B[:, k1, g1] * B[:, k2, g2]
        se = prod.std() / np.sqrt(n)
        assert abs(prod.mean() - covariance(g1, times[k1], g2, times[k2], binary3)) < 4 * se
