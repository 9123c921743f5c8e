import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slelab.lattice import build_disk_domain, domain_from_vertices, square_walk
from slelab.lerw import (conditioned_batch, decompose, expected_visits_check, loop_erase, loop_erase_naive,
                         markov_independence_test, reversal_test, sample_lerw_conditioned, sample_lerw_reversed,
                         step_law_check)
from slelab.rng import make_rng
from slelab.walks import exact_green, exact_hitting, sample_walk

SQUARE3 = domain_from_vertices([(x, y) for x in (-1, 0, 1) for y in (-1, 0, 1)])
CROSS = build_disk_domain(1.0)


def _random_walk(seed, T):
    rng = np.random.default_rng(seed)
    steps = np.array([(1, 0), (-1, 0), (0, 1), (0, -1)])[rng.integers(0, 4, T)]
    return np.concatenate([[[0, 0]], np.cumsum(steps, axis=0)])


def _stopped_walk(seed, T):
    """Random walk followed by straight steps east until a fresh vertex is reached."""
    w = _random_walk(seed, T)
    seen = {tuple(v) for v in w.tolist()}
    tail = []
    x, y = w[-1]
    while True:
        x += 1
        tail.append((x, y))
        if (x, y) not in seen:
            break
    return np.concatenate([w, np.array(tail)])


def test_erasure_examples():
    assert loop_erase([[0, 0], [1, 0], [0, 0], [0, 1]]).vertices.tolist() == [[0, 0], [0, 1]]
    w = [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0], [0, -1]]
    assert loop_erase(w).vertices.tolist() == [[0, 0], [0, -1]]
    simple = [[0, 0], [1, 0], [2, 0], [2, 1]]
    assert loop_erase(simple).vertices.tolist() == simple


@given(st.integers(0, 10**6), st.integers(1, 400))
def test_erasure_matches_naive_and_is_simple(seed, T):
    w = _random_walk(seed, T)
    le = loop_erase(w).vertices
    assert np.array_equal(le, loop_erase_naive(w))
    assert len({tuple(v) for v in le.tolist()}) == len(le)
    assert np.all(np.abs(np.diff(le, axis=0)).sum(axis=1) == 1)
    assert np.array_equal(le[0], w[0]) and np.array_equal(le[-1], w[-1])
    # idempotent
    assert np.array_equal(loop_erase(le).vertices, le)


@given(st.integers(0, 10**6), st.integers(1, 400))
def test_decomposition_invariants(seed, T):
    w = _stopped_walk(seed, T)
    dec = decompose(w)
    n = dec.hit_times
    assert np.all(np.diff(n) < 0)
    assert np.array_equal(dec.reassemble(), w)
    g = dec.gamma.vertices
    assert np.array_equal(g[0], w[-1]) and np.array_equal(g[-1], w[0])
    assert np.array_equal(g, loop_erase(w[::-1]).vertices)
    for k, lp in enumerate(dec.loops, start=1):
        # loop k starts at gamma_k and its last step crosses [gamma_k, gamma_{k-1}]
        assert np.array_equal(lp[0], g[k])
        assert np.array_equal(lp[-2], g[k]) and np.array_equal(lp[-1], g[k - 1])


def test_decompose_rejects_unstopped_walk():
    with pytest.raises(ValueError):
        decompose([[0, 0], [1, 0], [0, 0]])


def test_unit_cross_decomposition():
    dec = sample_lerw_reversed(CROSS, rng=make_rng(0))
    assert len(dec.gamma) == 2
    assert dec.gamma.vertices[-1].tolist() == [0, 0]
    assert len(dec.loops) == 1 and np.array_equal(dec.loops[0], dec.walk)


def test_disk_decomposition_reassembles():
    dec = sample_lerw_reversed(build_disk_domain(40), rng=make_rng(11))
    assert np.array_equal(dec.reassemble(), dec.walk)
    assert dec.gamma.orientation == "reversed"
    d = json.loads(dec.gamma.to_json())
    assert d["orientation"] == "reversed" and len(d["vertices"]) == len(dec.gamma)


def test_forward_lerw_ends_on_boundary():
    D = build_disk_domain(20)
    w = sample_walk(D, (0, 0), rng=make_rng(4))
    le = loop_erase(w)
    assert not D.contains(le.vertices[-1])
    assert np.all(D.indices_of(le.vertices[:-1]) >= 0)


def test_reversal_law():
    rep = reversal_test(build_disk_domain(15), None, 200_000, make_rng(5))
    assert rep["p_value"] > 0.001


def test_conditioned_unit_cross_is_deterministic():
    east = CROSS.pair_index[(0, 0, 1, 0)]
    for s in range(5):
        dec = sample_lerw_conditioned(CROSS, None, east, make_rng(s))
        assert dec.walk.tolist() == [[0, 0], [1, 0]]


def test_conditioned_exit_is_exact():
    for k in range(len(SQUARE3.boundary_pairs)):
        for s in range(10):
            dec = sample_lerw_conditioned(SQUARE3, None, k, make_rng(s, k))
            assert np.array_equal(dec.walk[-2:].ravel(), SQUARE3.boundary_pairs[k])


def test_conditioned_rejects_zero_probability():
    D = domain_from_vertices([(0, 0), (1, 0)])
    far = domain_from_vertices([(0, 0), (1, 0), (5, 5)])
    k = far.pair_index[(5, 5, 6, 5)]
    with pytest.raises(ValueError):
        sample_lerw_conditioned(far, None, k, make_rng(0))
    assert len(D.boundary_pairs) == 6


def test_conditioned_first_step_law():
    for k in (0, 5):
        rep = step_law_check(SQUARE3, None, k, 100_000, make_rng(2, k))
        assert np.max(np.abs(rep["z"])) < 4
        assert abs(rep["expected"].sum() - 1) < 1e-12


def test_mixture_of_conditioned_walks_is_unconditioned():
    H = exact_hitting(SQUARE3, (0, 0))
    n = 40_000
    counts = np.random.default_rng(8).multinomial(n, H)
    first = np.zeros(4)
    for k, c in enumerate(counts):
        if c:
            out = conditioned_batch(SQUARE3, None, k, int(c), make_rng(8, k))
            first += np.bincount(out[:, 0], minlength=4)
    se = np.sqrt(0.25 * 0.75 / n)
    assert np.max(np.abs(first / n - 0.25)) / se < 4


def test_expected_visits_trivial_cases():
    rep = expected_visits_check(CROSS, None, 0, (0, 0), (0, 0), 100, make_rng(0))
    assert rep["exact"] == pytest.approx(1.0)
    assert rep["estimate"] == 1.0
    D = build_disk_domain(5)
    k = D.pair_index[(4, 0, 5, 0)]
    rep = expected_visits_check(D, None, k, (4, 0), (4, 0), 10, make_rng(0))
    assert rep["exact"] == pytest.approx(exact_green(D, (4, 0), (4, 0)))


@pytest.mark.parametrize("method, n", [("exact", 100_000), ("rejection", 20_000)])
def test_expected_visits_square3(method, n):
    k = SQUARE3.pair_index[(1, 0, 2, 0)]
    rep = expected_visits_check(SQUARE3, None, k, (1, 0), (0, 1), n, make_rng(9), method=method)
    assert not rep["inconclusive"]
    assert abs(rep["estimate"] - rep["exact"]) < 4 * rep["stderr"]


def test_expected_visits_impossible_event_is_inconclusive():
    k = SQUARE3.pair_index[(1, 0, 2, 0)]
    rep = expected_visits_check(SQUARE3, None, k, (0, 0), (0, 1), 100, make_rng(0))
    assert rep["inconclusive"]


def test_first_loop_markov_property():
    k = SQUARE3.pair_index[(1, 1, 2, 1)]
    rep = markov_independence_test(SQUARE3, square_walk(), k, 200_000, make_rng(3))
    assert rep["p_value"] > 0.001
