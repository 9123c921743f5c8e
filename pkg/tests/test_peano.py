import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2_contingency

from slelab.peano import (PeanoPath, alpha_prefix_sizes, dual_tree, dual_wired_trees, enumerate_peano_paths,
                          enumerate_trees, is_dual_tree, is_primal_tree, peano_curve, peano_svg,
                          reverse_peano, sample_tree, tree_count, tree_from_peano, validate_peano_path)
from slelab.peano_config import (PeanoConfig, arc_distances, disk_peano_config, minimal_peano_config,
                                 rect_peano_config, swapped_config, validate_peano_config)
from slelab.rng import make_rng


@pytest.fixture(scope="module")
def rect12():
    return rect_peano_config(12, 8, min_scale=1)


@pytest.fixture(scope="module")
def small():
    return rect_peano_config(2, 2, min_scale=1)


def test_minimal_config_single_path():
    cfg = minimal_peano_config()
    assert all(validate_peano_config(cfg).values())
    paths = enumerate_peano_paths(cfg)
    assert len(paths) == 1
    np.testing.assert_array_equal(paths[0].vertices, [cfg.a, cfg.b])
    assert cfg.peano_vertex_count == 0


def test_rect_config_valid():
    cfg = rect_peano_config(20, 10)
    rep = validate_peano_config(cfg)
    assert all(rep.values()), rep
    assert cfg.peano_vertex_count > 0


def test_disk_arcs_close_to_boundary():
    d = arc_distances(disk_peano_config(30))
    assert d["alpha"] <= 10 and d["beta"] <= 10


def test_swap_is_involution(rect12):
    sw = swapped_config(rect12)
    assert all(validate_peano_config(sw).values())
    back = swapped_config(sw)
    for name in ("alpha_vertices", "alpha_edges", "beta_vertices", "beta_edges", "a", "b"):
        a = {tuple(x) for x in np.asarray(getattr(rect12, name)).reshape(-1, 2).tolist()}
        b = {tuple(x) for x in np.asarray(getattr(back, name)).reshape(-1, 2).tolist()}
        assert a == b, name


def test_config_json_roundtrip(rect12):
    back = PeanoConfig.from_json(rect12.to_json())
    np.testing.assert_array_equal(back.alpha_edges, rect12.alpha_edges)
    np.testing.assert_array_equal(back.b, rect12.b)
    assert back.peano_vertex_count == rect12.peano_vertex_count


def test_sampled_paths_valid(rect12):
    rng = make_rng(3)
    for _ in range(20):
        T = sample_tree(rect12, rng)
        gamma = peano_curve(T, rect12)
        rep = validate_peano_path(gamma, rect12)
        assert all(rep.values()), rep
        Td = dual_tree(T, rect12)
        assert is_primal_tree(T, rect12) and is_dual_tree(Td, rect12)
        assert len(T.edges) == len(rect12.primal_vertices) - 1
        assert len(Td.edges) == len(rect12.dual_vertices) - 1
        assert tree_from_peano(gamma, rect12).edges == T.edges


def test_alpha_prefix_grows_by_at_most_one(rect12):
    gamma = peano_curve(sample_tree(rect12, make_rng(4)), rect12)
    sizes = alpha_prefix_sizes(gamma, rect12)
    d = np.diff(sizes)
    assert np.all((d == 0) | (d == 1))
    assert sizes[0] == len(rect12.alpha_edges)
    assert sizes[-1] == len(rect12.primal_vertices) - 1


def test_path_json(rect12):
    gamma = peano_curve(sample_tree(rect12, make_rng(5)), rect12)
    assert '"scale": 4' in gamma.to_json()


def test_exhaustive_bijection(small):
    trees = enumerate_trees(small)
    paths = enumerate_peano_paths(small)
    assert len(trees) == len(paths) == round(tree_count(small))
    images = {peano_curve(T, small) for T in trees}
    assert images == set(paths)
    for T in trees:
        assert tree_from_peano(peano_curve(T, small), small).edges == T.edges


def test_wired_free_duality(small):
    duals = {dual_tree(T, small).edges for T in enumerate_trees(small)}
    assert duals == dual_wired_trees(small)


def test_reversal_lands_on_swapped_paths(small):
    sw_paths = set(enumerate_peano_paths(swapped_config(small)))
    rev = {reverse_peano(g, small)[0] for g in enumerate_peano_paths(small)}
    assert rev == sw_paths


def test_reversal_prefix_law_matches_direct(rect12):
    # reversed samples and direct samples on the swapped config agree on the first steps
    n, k = 5000, 4
    rng = make_rng(11)
    sw = swapped_config(rect12)
    count = {}
    for _ in range(n):
        rv, _ = reverse_peano(peano_curve(sample_tree(rect12, rng), rect12, check=False), rect12)
        key = rv.vertices[: k + 1].tobytes()
        count.setdefault(key, [0, 0])[0] += 1
    for _ in range(n):
        g = peano_curve(sample_tree(sw, rng), sw, check=False)
        key = g.vertices[: k + 1].tobytes()
        count.setdefault(key, [0, 0])[1] += 1
    table = np.array([v for v in count.values() if sum(v) >= 10])
    assert len(table) >= 2
    p = chi2_contingency(table.T)[1]
    assert p > 1e-3


def test_manhattan_out_degrees(rect12):
    # every interior Peano vertex has one incoming and one outgoing step on a path
    gamma = peano_curve(sample_tree(rect12, make_rng(6)), rect12)
    v = [tuple(x) for x in gamma.vertices.tolist()]
    out_deg = {x: 0 for x in v}
    in_deg = {x: 0 for x in v}
    for p, q in zip(v[:-1], v[1:]):
        out_deg[p] += 1
        in_deg[q] += 1
    assert all(out_deg[x] == 1 and in_deg[x] == 1 for x in v[1:-1])


def test_invalid_path_rejected(rect12):
    gamma = peano_curve(sample_tree(rect12, make_rng(7)), rect12)
    bad = PeanoPath(gamma.vertices[:-1])
    assert not all(validate_peano_path(bad, rect12).values())
    with pytest.raises(ValueError):
        tree_from_peano(bad, rect12)


def test_svg(rect12):
    T = sample_tree(rect12, make_rng(8))
    svg = peano_svg(rect12, T, peano_curve(T, rect12))
    assert svg.startswith("<svg") or "<svg" in svg


@settings(max_examples=15)
@given(w=st.integers(2, 8), h=st.integers(2, 6), seed=st.integers(0, 10**6))
def test_rect_paths_property(w, h, seed):
    cfg = rect_peano_config(w, h, min_scale=1)
    T = sample_tree(cfg, make_rng(seed))
    gamma = peano_curve(T, cfg)
    assert all(validate_peano_path(gamma, cfg).values())
    rv, sw = reverse_peano(gamma, cfg)
    assert all(validate_peano_path(rv, sw).values())
    back, _ = reverse_peano(rv, sw)
    np.testing.assert_array_equal(back.vertices, gamma.vertices)
