import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slelab.lattice import (GridDomain, LatticeWalkSpec, annulus_domain, build_box_domain, build_disk_domain,
                            domain_from_vertices, is_simply_connected, lazy_square_walk, spec_report,
                            square_walk, triangular_walk, validate_domain, with_identity_covariance)


def test_disk_radius_1_5_is_three_by_three():
    # |v| < 1.5 admits the diagonal neighbours (|v| = sqrt 2)
    D = build_disk_domain(1.5)
    assert {tuple(v) for v in D.interior.tolist()} == {(x, y) for x in (-1, 0, 1) for y in (-1, 0, 1)}
    assert len(D.boundary_pairs) == 12


def test_disk_radius_1_01_is_plus_shape():
    D = build_disk_domain(1.01)
    assert {tuple(v) for v in D.interior.tolist()} == {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)}
    # every arm vertex has three exit edges
    assert len(D.boundary_pairs) == 12


def test_disk_radius_1_is_unit_cross():
    D = build_disk_domain(1.0)
    assert D.interior.tolist() == [[0, 0]]
    assert len(D.boundary_pairs) == 4
    assert D.inradius_origin == 1.0


def test_disk_radius_100_inradius():
    D = build_disk_domain(100)
    assert 99 <= D.inradius_origin <= 100


def test_boundary_pairs_have_one_interior_endpoint():
    D = build_disk_domain(12)
    assert np.all(D.indices_of(D.boundary_pairs[:, :2]) >= 0)
    assert np.all(D.indices_of(D.boundary_pairs[:, 2:]) < 0)
    assert np.all(np.abs(D.boundary_pairs[:, :2] - D.boundary_pairs[:, 2:]).sum(axis=1) == 1)


def test_disk_rejects_exterior_origin():
    with pytest.raises(ValueError):
        build_disk_domain(3, center=5 + 0j)


def test_validate_disk_passes():
    assert all(validate_domain(build_disk_domain(10)).values())


def test_validate_annulus_fails_simple_connectivity():
    rep = validate_domain(annulus_domain(10, 3))
    assert not rep["simply_connected"]


def test_validate_without_origin():
    D = domain_from_vertices(np.array([[3, 3], [3, 4]]))
    assert not validate_domain(D)["origin_in_interior"]


def test_domain_json_roundtrip():
    D = build_disk_domain(7.5)
    d = json.loads(D.to_json())
    assert set(d) == {"lattice", "interior", "boundary_pairs"}
    E = GridDomain.from_json(D.to_json())
    assert np.array_equal(E.interior, D.interior)
    assert np.array_equal(E.boundary_pairs, D.boundary_pairs)


@given(st.floats(1.01, 30), st.floats(0, 10))
def test_disk_monotone_and_valid(r1, extra):
    a = build_disk_domain(r1)
    b = build_disk_domain(r1 + extra)
    assert all(validate_domain(a).values())
    A = {tuple(v) for v in a.interior.tolist()}
    B = {tuple(v) for v in b.interior.tolist()}
    assert A <= B


@given(st.floats(1.5, 25), st.floats(0, 0.9), st.floats(0, 2 * np.pi))
def test_offcentre_disks_valid(r, frac, phi):
    D = build_disk_domain(r, center=frac * r * np.exp(1j * phi) * 0.99)
    assert all(validate_domain(D).values())


def test_square_walk_spec_and_normalization():
    s = square_walk()
    assert s.is_symmetric()
    n = with_identity_covariance(s)
    assert n.covariance_is_identity
    assert np.allclose(n.covariance(), np.eye(2), atol=1e-12)


def test_triangular_walk_is_centred_and_isotropic():
    t = triangular_walk()
    assert not t.is_symmetric()
    assert abs(t.mean()) < 1e-12
    n = with_identity_covariance(t)
    assert np.allclose(n.covariance(), np.eye(2), atol=1e-9)


def test_spec_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        LatticeWalkSpec(((1, 0), (-1, 0)), (0.6, 0.6))
    with pytest.raises(ValueError):
        LatticeWalkSpec(((1, 0), (-1, 0)), (1.2, -0.2))
    with pytest.raises(ValueError):
        LatticeWalkSpec(((1, 0), (0, 1)), (0.5, 0.5), covariance_is_identity=True)


@given(st.floats(0, 0.9))
def test_lazy_walk_spec(p0):
    s = lazy_square_walk(p0)
    rep = spec_report(s)
    assert all(rep.values())
    assert abs(s.probs.sum() - 1) < 1e-12


def test_box_is_simply_connected():
    assert is_simply_connected(build_box_domain(4).interior)


def test_triangular_disk_valid():
    D = build_disk_domain(6, triangular_walk())
    assert D.lattice == "triangular"
    assert all(validate_domain(D).values())
