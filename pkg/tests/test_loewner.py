import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from slelab.loewner import (CHORDAL, RADIAL, ConformalChain, DrivingRecord, chordal_slit_step, coverage_fraction,
                            curve_to_csv, diam_vs_k_check, extract_driving, radial_slit_dt, radial_slit_tip,
                            radial_step, sle_driving, sle_trace)
from slelab.rng import make_rng


def test_slit_map_zero():
    f = chordal_slit_step(0.0, 1.0)
    assert abs(f(2j)) < 1e-14
    assert f.tip == 2j


def test_slit_map_expansion():
    f = chordal_slit_step(0.0, 1.0)
    z = 50.0 + 80.0j
    assert abs(f(z) - (z + 2 / z)) < 10 / abs(z) ** 3


def test_slit_map_sides():
    f = chordal_slit_step(0.0, 1.0)
    assert f(1j, side=1).real > 0
    assert f(1j, side=-1).real < 0


def test_slit_step_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        chordal_slit_step(0.0, 0.0)


@settings(max_examples=40)
@given(W=st.floats(-3, 3), dt=st.floats(1e-4, 2), x=st.floats(-5, 5), y=st.floats(0.05, 5))
def test_slit_step_inverse(W, dt, x, y):
    assume(abs(x - W) > 1e-3 or y > 2 * np.sqrt(dt) + 1e-3)
    f = chordal_slit_step(W, dt)
    z = complex(x, y)
    w = f(z)
    assert w.imag > 0
    assert abs(f.inverse(w) - z) < 1e-9 * max(1, abs(z))


def test_vertical_segment_capacity():
    for h in (0.5, 1.0, 3.0):
        rec, _ = extract_driving(np.array([0, 1j * h]), CHORDAL)
        assert rec.times[-1] == pytest.approx(h * h / 4, abs=1e-12)
        assert np.all(np.abs(rec.values) < 1e-12)


def test_sqrt_curve_zero_driving():
    t = np.linspace(0, 1, 201)
    rec, _ = extract_driving(2j * np.sqrt(t), CHORDAL)
    assert np.max(np.abs(rec.values)) < 1e-6
    np.testing.assert_allclose(rec.times, t, atol=1e-6)


def test_chordal_roundtrip():
    rng = make_rng(0)
    W = np.concatenate([[0.0], np.cumsum(rng.standard_normal(100) * 0.05)])
    t = np.linspace(0, 1, 101)
    rec = DrivingRecord(CHORDAL, t, W)
    curve = np.concatenate([[complex(W[0], 0)], rec.chain().tips()])
    back, _ = extract_driving(curve, CHORDAL)
    assert len(back) == len(rec)
    assert np.max(np.abs(back.values - W)) < 1e-6
    assert np.max(np.abs(back.times - t)) < 1e-6


def test_scaling_covariance():
    rng = make_rng(1)
    W = np.concatenate([[0.0], np.cumsum(rng.standard_normal(40) * 0.05)])
    rec = DrivingRecord(CHORDAL, np.linspace(0, 1, 41), W)
    curve = np.concatenate([[0j], rec.chain().tips()])
    a, _ = extract_driving(curve, CHORDAL)
    b, _ = extract_driving(3.0 * curve, CHORDAL)
    np.testing.assert_allclose(b.times, 9 * a.times, atol=1e-6)
    np.testing.assert_allclose(b.values, 3 * a.values, atol=1e-6)


def test_hydrodynamic_normalization():
    rng = make_rng(2)
    rec = sle_driving(2.0, 1.0, 0.01, rng)
    chain = rec.chain()
    z = 1e6j
    g = chain.forward(z)
    assert abs(g - (z + 2 * chain.capacity / z)) < 1e-9 * abs(z)
    # the 1/z coefficient is 2t once the round-off of g - z is small
    z = 1e3 + 1e3j
    assert abs((chain.forward(z) - z) * z - 2 * chain.capacity) < 1e-3
    assert chain.capacity == pytest.approx(np.sum(chain.dts), abs=0)


def test_radial_derivative():
    f = radial_step(0.0, 0.1)
    assert abs(f.derivative_at_zero()) == pytest.approx(np.exp(0.1), abs=1e-8)


def test_radial_small_dt_identity():
    z = np.array([0.1 + 0.2j, -0.3j, 0.5])
    for dt in (1e-3, 1e-4):
        f = radial_step(0.7, dt)
        assert np.max(np.abs(f(z) - z)) < 20 * dt


def test_radial_opposite_point_moves_away():
    f = radial_step(0.0, 0.05)
    z = -0.5 + 0j
    w = f(z)
    assert w.real < z.real and abs(w.imag) < 1e-12


def test_radial_matches_closed_form():
    f = radial_step(1.2, 0.2)
    z = np.array([0.1 + 0.2j, -0.4 - 0.1j, 0.0])
    np.testing.assert_allclose(f(z), f.exact(z), atol=1e-8)
    w = f(0.3 - 0.3j)
    assert abs(f.inverse(w) - (0.3 - 0.3j)) < 1e-8


def test_radial_slit_tip_roundtrip():
    for r in (0.2, 0.5, 0.9):
        assert radial_slit_tip(radial_slit_dt(r)) == pytest.approx(r, abs=1e-12)


def test_radial_segment_constant_angle():
    theta = 0.8
    r = np.linspace(1.0, 0.3, 80)
    rec, chain = extract_driving(r * np.exp(1j * theta), RADIAL)
    assert np.max(np.abs(rec.values - theta)) < 1e-4
    assert rec.times[-1] == pytest.approx(radial_slit_dt(0.3), abs=1e-7)
    assert np.log(chain.derivative_at_zero()) == pytest.approx(chain.capacity, abs=1e-5)


def test_extract_rejects_bad_start():
    with pytest.raises(ValueError):
        extract_driving(np.array([1j, 2j]), CHORDAL)
    with pytest.raises(ValueError):
        extract_driving(np.array([0.5, 0.2]), RADIAL)
    with pytest.raises(ValueError):
        extract_driving(np.array([0j]), CHORDAL)


def test_record_validation():
    with pytest.raises(ValueError):
        DrivingRecord(CHORDAL, [0, 0.1, 0.1], [0, 0, 0])
    with pytest.raises(ValueError):
        DrivingRecord(RADIAL, [0, 0.1], [0, 4.0])
    with pytest.raises(ValueError):
        ConformalChain("spiral", [0.0], [0.1])


def test_record_csv_roundtrip():
    rec = sle_driving(3.0, 0.5, 0.01, make_rng(3))
    back = DrivingRecord.from_csv(rec.to_csv(), CHORDAL)
    np.testing.assert_array_equal(back.times, rec.times)
    np.testing.assert_array_equal(back.values, rec.values)
    text = curve_to_csv([0.0, 1.0], np.array([0j, 1 + 2j]))
    assert text.splitlines() == ["t,re,im", "0,0,0", "1,1,2"]


def test_kappa_zero_trace():
    t, pts, _ = sle_trace(0.0, CHORDAL, 1.0, 0.01, make_rng(4))
    np.testing.assert_allclose(pts, 2j * np.sqrt(t), atol=1e-12)


def test_kappa_eight_fills_window():
    cov = {k: np.median([coverage_fraction(sle_trace(k, CHORDAL, 1.0, 1e-3, make_rng(s))[1], cells=10)
                         for s in range(6)]) for k in (2.0, 8.0)}
    assert cov[8.0] > 0.5
    assert cov[8.0] > cov[2.0]
    assert coverage_fraction(np.array([0.1 + 0.1j]), window=(0, 1, 0, 1), cells=2) == 0.25


def test_sle_driving_validation():
    with pytest.raises(ValueError):
        sle_driving(2.0, 1.0, 0.0, make_rng(0))


def test_diam_vertical_slit():
    rec = DrivingRecord(CHORDAL, np.linspace(0, 1, 51), np.zeros(51))
    r = diam_vs_k_check(rec)
    np.testing.assert_allclose(r["ratios"], 2.0, atol=1e-9)


@pytest.mark.parametrize("c", [1.0, 5.0])
def test_diam_linear_driving(c):
    t = np.linspace(0, 1, 401)
    rec = DrivingRecord(CHORDAL, t, c * t)
    r = diam_vs_k_check(rec, checkpoints=np.linspace(0.01, 1, 30))
    assert 1 / 20 <= r["min"] and r["max"] <= 20


def test_diam_radial_small_t():
    rec = DrivingRecord(RADIAL, [0.0, 1e-4, 2e-4], [0.0, 0.001, 0.0])
    r = diam_vs_k_check(rec)
    assert np.all(np.isfinite(r["ratios"])) and np.all(r["ratios"] > 0)
