import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdtree import PickandsConfig, estimate_H, estimate_H_drift, estimate_H_L, staircase_measure
from bdtree.errors import AntichainTooLarge, BadArguments
from bdtree.pickands import log_staircase, pareto_front


def agree(a, b, k=3.0):
    return abs(a.value - b.value) <= k * math.hypot(a.stderr, b.stderr)


def test_staircase_examples():
    assert staircase_measure([[0.3, -0.2, 0.5]]) == pytest.approx(math.exp(0.6))
    assert staircase_measure([[0.0, 0.0], [-1.0, -0.5]]) == pytest.approx(1.0)
    want = 2 * math.exp(-1) - math.exp(-2)
    assert staircase_measure([[0, -1], [-1, 0]]) == pytest.approx(want, rel=1e-14)
    assert staircase_measure([[0, -1], [-1, 0]], method="inclusion_exclusion") == pytest.approx(want, rel=1e-14)
    with pytest.raises(BadArguments):
        staircase_measure(np.empty((0, 2)))


def test_cap():
    t = np.linspace(0, 1, 40)
    anti = np.c_[t, 1 - t]
    with pytest.raises(AntichainTooLarge):
        staircase_measure(anti, method="inclusion_exclusion")
    assert staircase_measure(anti) > 0


point_sets = st.integers(1, 3).flatmap(
    lambda N: st.lists(
        st.lists(st.floats(-3, 1, allow_nan=False), min_size=N, max_size=N), min_size=1, max_size=9
    )
)


@settings(max_examples=200, deadline=None)
@given(point_sets, st.data())
def test_staircase_invariances(pts, data):
    P = np.array(pts)
    v = staircase_measure(P)
    assert v == pytest.approx(staircase_measure(P, method="inclusion_exclusion"), rel=1e-9)
    perm = data.draw(st.permutations(range(len(P))))
    assert staircase_measure(P[list(perm)]) == pytest.approx(v, rel=1e-12)
    k = data.draw(st.integers(0, len(P) - 1))
    drop = data.draw(st.floats(0, 2))
    assert staircase_measure(np.vstack([P, P[k] - drop])) == pytest.approx(v, rel=1e-12)
    cols = data.draw(st.permutations(range(P.shape[1])))
    assert staircase_measure(P[:, list(cols)]) == pytest.approx(v, rel=1e-12)
    assert log_staircase(P) == pytest.approx(math.log(v), abs=1e-12)
    F = pareto_front(P)
    for f in F:
        assert not np.any(np.all(P >= f, axis=1) & np.any(P > f, axis=1))


def test_brute_force_2d():
    rng = np.random.default_rng(0)
    P = rng.uniform(-2, 0, size=(6, 2))
    # integrate exp(x1 + x2) over the union on a fine grid in the exp-substituted variables
    g = np.linspace(0, 1, 2001)[1:]
    E = np.exp(P)
    X, Y = np.meshgrid(g, g, indexing="ij")
    inside = np.zeros_like(X, dtype=bool)
    for a, b in E:
        inside |= (X < a) & (Y < b)
    assert inside.mean() == pytest.approx(staircase_measure(P), abs=2e-3)


CFG = PickandsConfig(n=20_000, seed=2)


def test_small_L():
    e = estimate_H_L(2, 1.0, 1e-6, PickandsConfig(n=2000, seed=2))
    assert e.value == pytest.approx(1.0, abs=1e-2)


def test_H_L_one_dim():
    e = estimate_H_L(1, 1.0, 20.0, PickandsConfig(n=50_000, seed=3))
    assert abs(e.value - 2) < 0.03 * 2
    assert e.to_dict() == {"N": 1, "lambda": 1.0, "L": 20.0, "value": e.value, "stderr": e.stderr}


def test_H_L_monotone():
    for N in (1, 2):
        a = estimate_H_L(N, 1.0, 10.0, PickandsConfig(n=10_000, seed=4))
        b = estimate_H_L(N, 1.0, 20.0, PickandsConfig(n=10_000, seed=5))
        assert a.value <= b.value + 2 * math.hypot(a.stderr, b.stderr)


def test_plain_and_tilted_agree_short_horizon():
    a = estimate_H_L(2, 1.0, 2.0, PickandsConfig(n=10_000, seed=6), method="plain")
    b = estimate_H_L(2, 1.0, 2.0, PickandsConfig(n=10_000, seed=7))
    assert agree(a, b)


def test_drift_truncation_tail():
    a = estimate_H_drift(1, 1.0, 20.0, PickandsConfig(n=30_000, seed=8))
    b = estimate_H_drift(1, 1.0, 40.0, PickandsConfig(n=30_000, seed=8))
    assert abs(a.value - b.value) < max(a.stderr, b.stderr)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_two_representations(N):
    n = {1: 20_000, 2: 10_000, 3: 300}[N]
    d = estimate_H_drift(N, 1.0, 20.0, PickandsConfig(n=n, seed=9))
    h = estimate_H_L(N, 1.0, 20.0, PickandsConfig(n=n, seed=10))
    assert agree(d, h)
    assert 0 < d.value <= 2**N + 3 * d.stderr


def test_two_dim_bracket():
    e = estimate_H_drift(2, 1.0, 16.0, PickandsConfig(n=10_000, seed=11))
    assert e.value - 3 * e.stderr > 2 and e.value + 3 * e.stderr < 4


def test_estimate_H_flag_and_cross_check():
    e = estimate_H(2, 1.0, PickandsConfig(n=4000, seed=12), halving=False)
    assert e.infinite
    h = estimate_H_L(2, 1.0, e.L, PickandsConfig(n=4000, seed=13))
    assert agree(e, h)
