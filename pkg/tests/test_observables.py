import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slelab.lattice import build_box_domain
from slelab.loewner import CHORDAL, RADIAL
from slelab.observables import (KEY_C0, IncrementDataset, halfplane_map, increment_tests, lambda_martingale_check,
                                lambda_martingale_exact, lerw_key_estimate, mirrored_pair, peano_key_estimate,
                                pipeline_calibration, radial_prefix, stopping_index, to_json, with_rerun,
                                driving_samples, driving_convergence)


def test_stopping_index_rule():
    t = np.array([0.0, 0.02, 0.05, 0.1])
    d = np.array([0.0, 0.1, -0.35, 0.0])
    assert stopping_index(t, d, 0.3) == 2
    assert stopping_index(t, np.zeros(4), 0.3) == 3
    assert stopping_index(t[:2], d[:2], 0.3) == -1


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(0, 0.05), st.floats(-0.2, 0.2)), min_size=1, max_size=40),
       st.floats(0.05, 0.5))
def test_stopping_index_first_crossing(steps, delta):
    t = np.cumsum([s[0] for s in steps])
    d = np.cumsum([s[1] for s in steps])
    m = stopping_index(t, d, delta)
    if m >= 0:
        assert t[m] >= delta ** 2 or abs(d[m]) >= delta
        assert np.all((t[:m] < delta ** 2) & (np.abs(d[:m]) < delta))
    else:
        assert np.all((t < delta ** 2) & (np.abs(d) < delta))


def test_radial_prefix_cut():
    z = np.linspace(1.0, 0.0, 101).astype(complex)
    p = radial_prefix(z, 0.5)
    assert abs(p[-1]) < np.exp(-0.5) / 4 and abs(p[-2]) >= np.exp(-0.5) / 4
    assert len(radial_prefix(z[:10], 0.5)) == 10


def test_halfplane_map():
    f = halfplane_map(-1 + 0j, 1 + 0j)
    assert abs(f(-1 + 0j)) < 1e-14
    assert abs(abs(f(0j)) - 1) < 1e-14
    assert f(0.3 + 0.2j).imag > 0 and f(-0.1 - 0.5j).imag > 0


def test_lerw_key_estimate_small():
    rep = lerw_key_estimate(60, 0.3, 12, seed=1, enforce_scale=False)
    assert rep["n"] + rep["dropped"] == 12
    assert rep["bound"] == pytest.approx(2 * 0.3 ** 3 * KEY_C0)
    s = rep["samples"]
    assert np.all((np.abs(s["Delta_m"]) >= 0.3) | (s["t_m"] >= 0.09))
    assert set(json.loads(to_json(rep))) >= {"estimate", "stderr", "n", "test", "p_value", "verdict"}
    with pytest.raises(ValueError):
        lerw_key_estimate(60, 0.3, 2)


def test_mirror_negates_exactly():
    a, b = mirrored_pair(40, 0.3, 4, seed=2)
    np.testing.assert_allclose(b, -a, atol=1e-9)


def test_peano_mirror_negates():
    a = peano_key_estimate(20, 0.3, 4, seed=3)["samples"]["Delta_m"]
    b = peano_key_estimate(20, 0.3, 4, seed=3, mirror=True)["samples"]["Delta_m"]
    np.testing.assert_allclose(b, -a, atol=1e-9)


def test_peano_key_requires_balanced_arcs():
    with pytest.raises(ValueError):
        peano_key_estimate(20, 0.3, 2, theta_a=0.0, theta_b=0.3)


def test_martingale_exact_small_square():
    D = build_box_domain(1)
    for pair in D.boundary_pairs[:6]:
        gamma0 = pair[2:]
        M0, EM1 = lambda_martingale_exact(D, (1, 0), gamma0)
        assert EM1 == pytest.approx(M0, abs=1e-14)


def test_martingale_zero_steps():
    rep = lambda_martingale_check(20, 50, sigma=0, seed=0)
    assert rep["estimate"] == 0.0 and rep["verdict"] == "pass"


def test_martingale_small():
    rep = lambda_martingale_check(20, 400, sigma=4, seed=1)
    assert rep["verdict"] == "pass"
    assert rep["sigma"] <= 4


def _brownian(n, kappa, T, rng, n_grid=4):
    grid = T * np.arange(1, n_grid + 1) / n_grid
    inc = rng.standard_normal((n, n_grid)) * np.sqrt(kappa * T / n_grid)
    return IncrementDataset(grid, np.cumsum(inc, axis=1), np.zeros(n, bool), T, CHORDAL)


def test_increment_tests_brownian(rng):
    rep = increment_tests(_brownian(2000, 2.0, 0.2, rng), 2.0, (1.6, 2.4))
    assert rep["verdict"] == "pass"
    assert rep["var_ratio"] == pytest.approx(2.0, rel=0.1)


def test_increment_tests_detect_wrong_speed(rng):
    rep = increment_tests(_brownian(2000, 4.0, 0.2, rng), 2.0, (1.6, 2.4))
    assert rep["verdict"] == "fail" and not rep["var_ok"]


def test_increment_tests_detect_drift(rng):
    data = _brownian(2000, 2.0, 0.2, rng)
    data.values += 0.5 * data.grid
    assert not increment_tests(data, 2.0, (1.6, 2.4))["means_ok"]


def test_increment_tests_detect_correlation(rng):
    data = _brownian(2000, 2.0, 0.2, rng)
    data.values[:, 2:] += data.values[:, 1:2]
    assert not increment_tests(data, 2.0, (0.1, 10))["rho_ok"]


def test_increment_tests_truncation_inconclusive(rng):
    data = _brownian(300, 2.0, 0.2, rng)
    data.truncated[:10] = True
    assert increment_tests(data, 2.0, (1.6, 2.4))["verdict"] == "inconclusive"


def test_dataset_csv(rng):
    text = _brownian(3, 2.0, 0.2, rng).to_csv()
    lines = text.splitlines()
    assert lines[0].startswith("replica,truncated,t=0.05")
    assert len(lines) == 4


def test_driving_samples_lerw_shapes():
    data = driving_samples("lerw", 40, 0.1, 3, seed=0)
    assert data.values.shape == (3, 4) and data.mode == RADIAL
    assert np.all(np.isfinite(data.values[~data.truncated]))
    with pytest.raises(ValueError):
        driving_samples("ising", 40, 0.1, 3)


def test_driving_convergence_preconditions():
    with pytest.raises(ValueError):
        driving_convergence("lerw", 2.0, 40, 0.6, 300)
    with pytest.raises(ValueError):
        driving_convergence("lerw", 2.0, 40, 0.2, 100)


def test_with_rerun():
    calls = []

    def run(n, offset):
        calls.append((n, offset))
        return {"verdict": "fail" if offset == 0 else "pass"}

    rep = with_rerun(run, 50)
    assert calls == [(50, 0), (200, 50)] and rep["rerun"] and rep["verdict"] == "pass"


def test_pipeline_calibration_sle2():
    rep = pipeline_calibration(2.0, n_traces=100, T=1.0, dt=0.01, seed=0)
    assert 1.8 <= rep["estimate"] <= 2.2
    assert rep["verdict"] == "pass"
