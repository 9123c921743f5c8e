import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slelab.lattice import build_disk_domain, domain_from_vertices, lazy_square_walk, square_walk, triangular_walk
from slelab.rng import make_rng, run_replicas
from slelab.walks import (admissible_green, check_aG_identity, derivative_ratio, exact_green, exact_hitting,
                          green_column, green_row, hitting_matrix, mean_value_residual, potential_kernel,
                          potential_kernel_table, sample_exit_counts, sample_walk, table_header,
                          visit_probability, write_table_csv)

SQUARE3 = domain_from_vertices([(x, y) for x in (-1, 0, 1) for y in (-1, 0, 1)])
CROSS = build_disk_domain(1.0)
# exact rational solves of the 9x9 (square) and 4x4 (triangular) systems
G00_SQUARE3 = 3 / 2
G11_SQUARE3 = 67 / 56
H_CORNER_SQUARE3 = 1 / 16
H_MID_SQUARE3 = 1 / 8
TRI4 = domain_from_vertices([(0, 0), (1, 0), (0, 1), (1, 1)], "triangular")
G00_TRI4 = 27 / 25
H_TRI4 = {(0, 0, -1, -1): 9 / 25, (1, 0, 2, 0): 3 / 25, (1, 0, 0, -1): 3 / 25, (0, 1, 0, 2): 3 / 25,
          (0, 1, -1, 0): 3 / 25, (1, 1, 2, 1): 2 / 25, (1, 1, 1, 2): 2 / 25}


def test_unit_cross_walk_exits_in_one_step():
    w = sample_walk(CROSS, (0, 0), rng=make_rng(1))
    assert len(w.vertices) == 1
    assert np.abs(w.exit_pair[2:]).sum() == 1


def test_unit_cross_exact():
    assert np.allclose(exact_hitting(CROSS, (0, 0)), 0.25)
    assert exact_green(CROSS, (0, 0), (0, 0)) == pytest.approx(1.0, abs=1e-14)


def test_square3_oracles():
    assert exact_green(SQUARE3, (0, 0), (0, 0)) == pytest.approx(G00_SQUARE3, abs=1e-12)
    assert exact_green(SQUARE3, (1, 1), (1, 1)) == pytest.approx(G11_SQUARE3, abs=1e-12)
    H = exact_hitting(SQUARE3, (0, 0))
    pairs = SQUARE3.boundary_pairs
    corner = np.abs(pairs[:, 0]) + np.abs(pairs[:, 1]) == 2
    assert np.allclose(H[corner], H_CORNER_SQUARE3, atol=1e-12)
    assert np.allclose(H[~corner], H_MID_SQUARE3, atol=1e-12)


def test_triangular_directed_oracle():
    spec = triangular_walk()
    assert exact_green(TRI4, (0, 0), (0, 0), spec) == pytest.approx(G00_TRI4, abs=1e-12)
    H = exact_hitting(TRI4, (0, 0), spec)
    got = {tuple(r): h for r, h in zip(TRI4.boundary_pairs.tolist(), H)}
    for k, v in H_TRI4.items():
        assert got[k] == pytest.approx(v, abs=1e-12)
    assert abs(H.sum() - 1) < 1e-12


def test_walk_determinism_and_path_contract():
    D = build_disk_domain(50)
    a = sample_walk(D, (0, 0), rng=make_rng(42))
    b = sample_walk(D, (0, 0), rng=make_rng(42))
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.exit_pair, b.exit_pair)
    steps = np.abs(np.diff(a.vertices, axis=0)).sum(axis=1)
    assert np.all(steps == 1)
    assert np.all(D.indices_of(a.vertices) >= 0)
    assert not D.contains(a.exit_pair[2:])
    assert np.array_equal(a.exit_pair[:2], a.vertices[-1])


def test_lazy_walk_may_hold():
    D = build_disk_domain(5)
    w = sample_walk(D, (0, 0), lazy_square_walk(0.5), rng=make_rng(3))
    steps = np.abs(np.diff(w.vertices, axis=0)).sum(axis=1)
    assert set(steps.tolist()) <= {0, 1}
    assert 0 in steps


def test_exit_distribution_radius_20():
    D = build_disk_domain(20)
    n = 100_000
    counts, _ = sample_exit_counts(D, (0, 0), n, rng=make_rng(7))
    H = exact_hitting(D, (0, 0))
    keep = H >= 10 / n
    se = np.sqrt(H * (1 - H) / n)
    assert np.max(np.abs(counts / n - H)[keep] / se[keep]) < 4


@given(st.floats(2, 15), st.integers(0, 10_000))
def test_hitting_rows_sum_to_one(r, k):
    D = build_disk_domain(r)
    start = D.interior[k % D.n]
    assert abs(exact_hitting(D, start).sum() - 1) < 1e-10


@given(st.floats(2, 12), st.integers(0, 10_000))
def test_hitting_is_harmonic(r, k):
    D = build_disk_domain(r)
    j = k % len(D.boundary_pairs)
    bv = np.zeros(len(D.boundary_pairs))
    bv[j] = 1.0
    h = hitting_matrix(D, D.interior)[:, j]
    assert mean_value_residual(D, h, bv) < 1e-10


@given(st.floats(2, 12), st.integers(0, 10_000), st.integers(0, 10_000))
def test_green_symmetry(r, i, j):
    D = build_disk_domain(r)
    u, v = D.interior[i % D.n], D.interior[j % D.n]
    assert abs(exact_green(D, u, v) - exact_green(D, v, u)) < 1e-9


def test_green_row_column_consistency():
    D = build_disk_domain(9)
    spec = triangular_walk()
    Dt = build_disk_domain(9, spec)
    u = (2, 1)
    row = green_row(Dt, u, spec)
    col = green_column(Dt, u, spec)
    k = Dt.index_of(u)
    for j in range(0, Dt.n, 17):
        v = Dt.interior[j]
        assert row[j] == pytest.approx(exact_green(Dt, u, v, spec), rel=1e-10)
        assert col[j] == pytest.approx(exact_green(Dt, v, u, spec), rel=1e-10)
    assert row[k] == pytest.approx(col[k], rel=1e-12)
    assert green_row(D, u)[D.index_of((0, 0))] == pytest.approx(exact_green(D, u, (0, 0)))


def test_visit_probability_is_one_at_self():
    D = build_disk_domain(6)
    assert visit_probability(D, (1, 1), (1, 1)) == 1.0
    p = visit_probability(D, (0, 0), (2, 0))
    # G(0, v) = P(visit v) G(v, v)
    assert p == pytest.approx(exact_green(D, (0, 0), (2, 0)) / exact_green(D, (2, 0), (2, 0)), rel=1e-10)


def test_potential_kernel_values():
    assert potential_kernel(None, (0, 0), 40) == 0.0
    assert potential_kernel(None, (1, 0), 160) == pytest.approx(1.0, abs=0.01)
    # classical values for the simple walk: a(1,1) = 4/pi, a(2,0) = 4 - 8/pi
    assert potential_kernel(None, (1, 1), 160) == pytest.approx(4 / np.pi, abs=1e-3)
    assert potential_kernel(None, (2, 0), 160) == pytest.approx(4 - 8 / np.pi, abs=1e-3)
    with pytest.raises(ValueError):
        potential_kernel(None, (10, 0), 40)


def test_potential_kernel_log_fit_stable():
    K = potential_kernel_table(None, 160)
    fits = [K.fit(r, r + 10)[0] for r in (20, 25, 30)]
    assert (max(fits) - min(fits)) / np.mean(fits) < 0.01
    assert K.c1 == pytest.approx(2 / np.pi, rel=0.01)


def test_aG_identity():
    D = build_disk_domain(20)
    assert check_aG_identity(D, (0, 0), (0, 0)) < 0.02
    ring = D.boundary_pairs[0, :2]
    assert check_aG_identity(D, ring, (0, 0)) < 0.02
    small = build_disk_domain(3.2)
    assert check_aG_identity(small, (2, 0), (0, 0)) < 0.05


def test_aG_identity_reversed_triangular():
    spec = triangular_walk()
    D = build_disk_domain(12, spec)
    assert check_aG_identity(D, (2, 1), (0, 0), spec) < 0.02
    assert check_aG_identity(D, (2, 1), (0, 0), spec, reverse=True) < 0.02


def test_green_band_radius_30():
    _, g = admissible_green(build_disk_domain(30))
    assert len(g) > 0
    assert g.min() >= 1 / 50 and g.max() <= 50


DERIVATIVE_C = 3.0  # pilot: about 2.07 at r = 25, decreasing with r


def test_discrete_derivative_bound():
    for r in (25, 50, 100):
        assert derivative_ratio(build_disk_domain(r)) <= DERIVATIVE_C


def test_replicas_independent_of_threads():
    D = build_disk_domain(15)
    f = lambda rng, k: sample_walk(D, (0, 0), rng=rng).vertices.sum()
    assert run_replicas(f, 5, 8, threads=1) == run_replicas(f, 5, 8, threads=4)


def test_csv_header():
    D = build_disk_domain(3)
    buf = io.StringIO()
    head = table_header(seed=3, spec=square_walk(), domain=D)
    write_table_csv(buf, D.interior, green_row(D, (0, 0)), head)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# seed=3 spec=")
    assert "domain=" + D.digest() in lines[0]
    assert lines[1] == "x,y,value"
    assert len(lines) == D.n + 2
