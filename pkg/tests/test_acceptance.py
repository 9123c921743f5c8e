"""Acceptance criteria 1-10 at their stated sizes, tolerances and time budgets.

Each test prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary.
"""
import time

import pytest

from slelab import suites
from slelab.observables import pipeline_calibration

RESULTS = []


def _record(capsys, number: int, title: str, rep: dict, budget: float, seconds: float):
    ok = rep["verdict"] == "pass" and seconds < budget
    detail = "; ".join(f"{c['name']}: {c['verdict']}" for c in rep["checks"])
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title} ({seconds:.1f} s / {budget:.0f} s) [{detail}]"
    RESULTS.append(line)
    with capsys.disabled():
        print("\n" + line)
    failed = [c for c in rep["checks"] if c["verdict"] != "pass"]
    assert rep["verdict"] == "pass", failed
    assert seconds < budget, f"runtime {seconds:.1f} s exceeds {budget} s"


def _timed(fn, *args, **kw):
    t = time.perf_counter()
    rep = fn(*args, **kw)
    return rep, time.perf_counter() - t


def test_criterion_01_oracles(capsys):
    rep, s = _timed(suites.oracle_suite, seed=0, n=100_000, radius=10.0)
    _record(capsys, 1, "walk oracles", rep, 60, s)


def test_criterion_02_wilson(capsys):
    rep, s = _timed(suites.wilson_suite, seed=0, n=40_000)
    _record(capsys, 2, "Wilson sampler", rep, 60, s)


def test_criterion_03_bijection(capsys):
    rep, s = _timed(suites.bijection_suite, seed=0, max_trees=200)
    _record(capsys, 3, "Peano bijection and reversal", rep, 60, s)


def test_criterion_04_loewner(capsys):
    rep, s = _timed(suites.loewner_suite, seed=0, n_traces=500)
    _record(capsys, 4, "Loewner pipeline", rep, 120, s)


@pytest.mark.slow
def test_criterion_05_lerw_key_estimate(capsys):
    rep, s = _timed(suites.keyestimate_suite, seed=0, R=400, delta=0.3, n=400)
    _record(capsys, 5, "LERW key estimate", rep, 600, s)


@pytest.mark.slow
def test_criterion_06_lerw_convergence(capsys):
    t = time.perf_counter()
    cal = pipeline_calibration(2.0, n_traces=500, seed=0)
    assert cal["verdict"] == "pass", cal
    rep = suites.convergence_suite("lerw", "full", seed=0)
    s = time.perf_counter() - t
    _record(capsys, 6, "LERW driving convergence", rep, 1800, s)


@pytest.mark.slow
def test_criterion_07_peano_convergence(capsys):
    rep, s = _timed(suites.convergence_suite, "peano", "full", seed=0)
    _record(capsys, 7, "Peano driving convergence", rep, 2700, s)


def test_criterion_08_harmonic(capsys):
    rep, s = _timed(suites.harmonic_suite, R_values=(100, 200), bounds=(0.1, 0.05), disk_R=60)
    _record(capsys, 8, "discrete harmonic approximation", rep, 300, s)


def test_criterion_09_potential(capsys):
    rep, s = _timed(suites.potential_suite)
    _record(capsys, 9, "potential kernel", rep, 120, s)


def test_criterion_10_green_bounds(capsys):
    rep, s = _timed(suites.green_bounds_suite, seed=0, n_domains=50)
    _record(capsys, 10, "Green's function bounds", rep, 60, s)
