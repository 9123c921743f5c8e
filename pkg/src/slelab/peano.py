"""Spanning trees with wired boundary ``alpha`` and their Peano curves.

Coordinates follow :mod:`slelab.peano_config` (scaled by 4); a primal tree
is stored as the set of midpoints of its edges.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .peano_config import (MidGrid, PeanoConfig, crossing_midpoint, crosses_primal, dual_edge_ends,
                           manhattan_out, primal_edge_ends, primal_of, swapped_config)
from .ust import SpanningTree, WilsonGraph, count_spanning_trees, enumerate_spanning_trees

ALPHA = "alpha"
BETA = "beta"


@dataclass(frozen=True, eq=False)
class PeanoPath:
    """Peano vertices ``a = w_0, ..., w_{ell+1} = b`` with compliance flags."""

    vertices: np.ndarray
    flags: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        return isinstance(other, PeanoPath) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())

    def to_json(self) -> str:
        return json.dumps({"scale": 4, "vertices": self.vertices.tolist()})


def _keys(pts) -> frozenset:
    return frozenset(map(tuple, np.asarray(pts, dtype=np.int64).reshape(-1, 2).tolist()))


def tree_midpoints(T: SpanningTree) -> np.ndarray:
    m = np.array(sorted(T.edges), dtype=np.int64).reshape(-1, 2)
    return m


# ---------------------------------------------------------------------------
# wired graph H(D) with alpha contracted


@dataclass
class WiredGraph:
    """``H(D)`` with ``alpha`` contracted to vertex 0.

    ``vertices[k]`` is the primal vertex behind index ``k >= 1``; ``mids[e]``
    is the midpoint of input edge ``e``.
    """

    vertices: np.ndarray
    mids: np.ndarray
    tails: np.ndarray
    heads: np.ndarray
    wilson: WilsonGraph

    @property
    def n(self) -> int:
        return len(self.vertices) + 1


@lru_cache(maxsize=8)
def _wired_graph_cached(key: int, cfg: PeanoConfig) -> WiredGraph:
    return _wired_graph(cfg)


def wired_graph(cfg: PeanoConfig) -> WiredGraph:
    return _wired_graph_cached(id(cfg), cfg)


def _wired_graph(cfg: PeanoConfig) -> WiredGraph:
    alpha = _keys(cfg.alpha_vertices)
    pv = cfg.primal_vertices
    in_alpha = np.array([tuple(v) in alpha for v in pv.tolist()], dtype=bool)
    others = pv[~in_alpha]
    index = {tuple(v): k + 1 for k, v in enumerate(others.tolist())}
    for v in alpha:
        index[v] = 0
    mids = cfg.h_edges
    horiz = (mids[:, 0] % 4) == 2
    d = np.where(horiz[:, None], np.array([2, 0]), np.array([0, 2]))
    e0 = mids - d
    e1 = mids + d
    t = np.array([index[tuple(v)] for v in e0.tolist()], dtype=np.int64)
    h = np.array([index[tuple(v)] for v in e1.tolist()], dtype=np.int64)
    keep = ~((t == 0) & (h == 0))
    mids, t, h = mids[keep], t[keep], h[keep]
    n = len(others) + 1
    g = sp.coo_matrix((np.ones(len(t)), (t, h)), shape=(n, n))
    if connected_components(g, directed=False)[0] != 1:
        raise ValueError("H(D) is not connected")
    return WiredGraph(others, mids, t, h, WilsonGraph.undirected(n, t, h))


def _tree_from_ids(cfg: PeanoConfig, G: WiredGraph, ids) -> SpanningTree:
    mids = np.concatenate([cfg.alpha_edges, G.mids[np.asarray(ids, dtype=np.int64)]])
    return SpanningTree(_keys(mids), ALPHA, tuple(int(i) for i in ids))


def sample_tree(cfg: PeanoConfig, rng: np.random.Generator, order=None) -> SpanningTree:
    """Uniform spanning tree of ``H(D)`` wired along ``alpha`` (Wilson)."""
    G = wired_graph(cfg)
    order = np.arange(1, G.n) if order is None else np.asarray(order)
    slot = G.wilson.run(order, [0], rng)
    return _tree_from_ids(cfg, G, np.sort(G.wilson.eid[slot[1:]]))


def sample_tree_ids(cfg: PeanoConfig, rng: np.random.Generator, n_samples: int) -> np.ndarray:
    """Edge indices (into ``wired_graph(cfg).mids``) of ``n_samples`` uniform trees."""
    G = wired_graph(cfg)
    slots = G.wilson.run_many(np.arange(1, G.n), [0], rng, n_samples)
    return np.sort(G.wilson.eid[slots[:, 1:]], axis=1)


def enumerate_trees(cfg: PeanoConfig, limit: int = 10**5) -> list:
    """All spanning trees of ``H(D)`` containing ``alpha``."""
    G = wired_graph(cfg)
    return [_tree_from_ids(cfg, G, ids) for ids in enumerate_spanning_trees(G.n, G.tails, G.heads, limit)]


def tree_count(cfg: PeanoConfig) -> float:
    G = wired_graph(cfg)
    return count_spanning_trees(G.n, G.tails, G.heads)


def _check_tree(T: SpanningTree, cfg: PeanoConfig) -> None:
    G = wired_graph(cfg)
    allowed = _keys(G.mids) | _keys(cfg.alpha_edges)
    if not T.edges <= allowed or not _keys(cfg.alpha_edges) <= T.edges:
        raise ValueError("tree must use edges of H(D) and contain alpha")
    extra = len(T.edges) - len(cfg.alpha_edges)
    if extra != G.n - 1:
        raise ValueError("tree does not span H(D)")


# ---------------------------------------------------------------------------
# dual tree


def dual_tree(T: SpanningTree, cfg: PeanoConfig) -> SpanningTree:
    """``beta`` plus every dual edge of the closed domain whose primal edge is not in ``T``."""
    _check_tree(T, cfg)
    tm = T.edges
    mids = [m for m in map(tuple, cfg.dual_edges.tolist()) if m not in tm]
    return SpanningTree(_keys(cfg.beta_edges) | frozenset(mids), BETA)


def is_spanning_tree(edge_mids, vertices, ends) -> bool:
    """Acyclic and spanning check for a tree given by edge midpoints."""
    vs = {v: k for k, v in enumerate(map(tuple, np.asarray(vertices).tolist()))}
    mids = list(edge_mids)
    if len(mids) != len(vs) - 1:
        return False
    t, h = [], []
    for m in mids:
        u, w = ends(m)
        if u not in vs or w not in vs:
            return False
        t.append(vs[u])
        h.append(vs[w])
    g = sp.coo_matrix((np.ones(len(t)), (t, h)), shape=(len(vs), len(vs)))
    return connected_components(g, directed=False)[0] == 1


def is_primal_tree(T: SpanningTree, cfg: PeanoConfig) -> bool:
    return is_spanning_tree(T.edges, cfg.primal_vertices, primal_edge_ends)


def is_dual_tree(Td: SpanningTree, cfg: PeanoConfig) -> bool:
    return is_spanning_tree(Td.edges, cfg.dual_vertices, dual_edge_ends)


# ---------------------------------------------------------------------------
# Peano curve


@numba.njit(cache=True)
def _trace(tree, lo, ax, ay, bx, by, cap):
    out = np.empty((cap + 1, 2), dtype=np.int64)
    x, y = ax, ay
    out[0, 0] = x
    out[0, 1] = y
    k = 1
    while not (x == bx and y == by):
        if k > cap:
            return out[:k], False
        sx = 2 if y % 4 == 1 else -2
        sy = -2 if x % 4 == 1 else 2
        # both out-steps cross the same edge pair; the horizontal one decides
        cx = x + sx // 2
        my = y - 1 if (y - 1 - (cx + 2)) % 4 == 0 else y + 1
        i = (cx - lo[0]) // 2
        j = (my - lo[1]) // 2
        in_tree = False
        if 0 <= i < tree.shape[0] and 0 <= j < tree.shape[1]:
            in_tree = tree[i, j]
        h_primal = cx % 4 == 0
        if in_tree == h_primal:
            y = y + sy
        else:
            x = x + sx
        out[k, 0] = x
        out[k, 1] = y
        k += 1
    return out[:k], True


def peano_curve(T: SpanningTree, cfg: PeanoConfig, check: bool = True) -> PeanoPath:
    """Manhattan path from ``a`` to ``b`` avoiding ``T`` and its dual tree.

    At each Peano vertex the two oriented out-steps cross the same edge
    pair; the step crossing the primal edge is taken unless that edge is in
    ``T``, in which case the step crossing the dual edge is taken.
    """
    if check:
        _check_tree(T, cfg)
    grid = MidGrid(*cfg.bbox)
    grid.set(tree_midpoints(T))
    ell = cfg.peano_vertex_count
    verts, ok = _trace(grid.data, grid.lo, int(cfg.a[0]), int(cfg.a[1]), int(cfg.b[0]), int(cfg.b[1]), ell + 1)
    if not ok or len(verts) != ell + 2:
        raise ValueError("tree does not produce a Peano path")
    return PeanoPath(verts, {"manhattan": True, "simple": True, "covers": True})


def validate_peano_path(gamma, cfg: PeanoConfig) -> dict:
    """Every :class:`PeanoPath` invariant for ``gamma`` on ``cfg``."""
    v = np.asarray(gamma.vertices if isinstance(gamma, PeanoPath) else gamma, dtype=np.int64)
    rep = {}
    rep["endpoints"] = len(v) >= 2 and np.array_equal(v[0], cfg.a) and np.array_equal(v[-1], cfg.b)
    steps = np.abs(np.diff(v, axis=0)).sum(axis=1)
    rep["unit_steps"] = bool(np.all(steps == 2))
    h, vv = manhattan_out(v[:-1])
    rep["manhattan"] = bool(np.all(np.all(v[1:] == h, axis=1) | np.all(v[1:] == vv, axis=1)))
    rep["simple"] = len(_keys(v)) == len(v)
    rep["covers"] = _keys(v) == _keys(cfg.peano_vertices) and len(v) == cfg.peano_vertex_count + 2
    if len(v) >= 2:
        m = crossing_midpoint(v[:-1], v[1:])
        prim = crosses_primal(v[:-1], v[1:])
        hit_alpha = prim & cfg.alpha_grid.get(m)
        hit_beta = ~prim & cfg.beta_grid.get(m)
        rep["avoids_boundary"] = not bool(np.any(hit_alpha | hit_beta))
    else:
        rep["avoids_boundary"] = False
    return rep


def tree_from_peano(gamma: PeanoPath, cfg: PeanoConfig) -> SpanningTree:
    """Recover the tree: ``alpha`` plus the edges between consecutive distinct primal neighbours."""
    rep = validate_peano_path(gamma, cfg)
    if not all(rep.values()):
        raise ValueError(f"invalid Peano path: {rep}")
    pv = primal_of(gamma.vertices)
    moved = np.any(pv[1:] != pv[:-1], axis=1)
    mids = (pv[1:][moved] + pv[:-1][moved]) // 2
    edges = _keys(cfg.alpha_edges) | _keys(mids)
    return SpanningTree(edges, ALPHA)


def alpha_prefix_sizes(gamma: PeanoPath, cfg: PeanoConfig) -> np.ndarray:
    """``|alpha_n(gamma)|`` for ``n = 0, ..., ell + 1``."""
    pv = primal_of(gamma.vertices)
    seen = set(_keys(cfg.alpha_edges))
    sizes = [len(seen)]
    for k in range(len(pv) - 1):
        if not np.array_equal(pv[k], pv[k + 1]):
            seen.add(tuple(((pv[k] + pv[k + 1]) // 2).tolist()))
        sizes.append(len(seen))
    return np.array(sizes)


def reverse_peano(gamma: PeanoPath, cfg: PeanoConfig):
    """Reversed path on the swapped configuration.

    The swapped configuration is the point reflection of ``cfg`` with the
    roles of ``(alpha, a)`` and ``(beta, b)`` exchanged; the reversed path is
    reflected with it.
    """
    sw = swapped_config(cfg)
    c = np.asarray(sw.meta["swap_center"], dtype=np.int64)
    rv = 2 * c - np.asarray(gamma.vertices)[::-1]
    return PeanoPath(rv.astype(np.int64), dict(gamma.flags)), sw


def enumerate_peano_paths(cfg: PeanoConfig, limit: int = 10**5) -> list:
    """All oriented Manhattan paths from ``a`` to ``b`` through every Peano vertex once."""
    target = _keys(cfg.peano_vertices)
    n = len(target)
    b = tuple(cfg.b.tolist())
    out = []
    path = [tuple(cfg.a.tolist())]
    used = {path[0]}

    def allowed(p, q):
        m = crossing_midpoint(np.array(p), np.array(q))
        if bool(crosses_primal(np.array(p), np.array(q))):
            return not cfg.alpha_grid.get(m[None])[0]
        return not cfg.beta_grid.get(m[None])[0]

    def rec():
        if len(out) > limit:
            raise ValueError("too many Peano paths")
        p = path[-1]
        if p == b:
            if len(path) == n:
                out.append(PeanoPath(np.array(path, dtype=np.int64)))
            return
        for q in manhattan_out(np.array(p)):
            q = tuple(q.tolist())
            if q in target and q not in used and allowed(p, q):
                used.add(q)
                path.append(q)
                rec()
                path.pop()
                used.discard(q)

    rec()
    return out


def dual_wired_trees(cfg: PeanoConfig, limit: int = 10**5) -> set:
    """All spanning trees of the dual graph wired along ``beta`` (as midpoint sets)."""
    beta = _keys(cfg.beta_vertices)
    dv = cfg.dual_vertices
    index = {}
    k = 1
    for v in map(tuple, dv.tolist()):
        if v in beta:
            index[v] = 0
        else:
            index[v] = k
            k += 1
    mids, t, h = [], [], []
    for m in map(tuple, cfg.dual_edges.tolist()):
        u, w = dual_edge_ends(m)
        if index[u] == 0 and index[w] == 0:
            continue
        mids.append(m)
        t.append(index[u])
        h.append(index[w])
    bm = _keys(cfg.beta_edges)
    return {bm | frozenset(mids[i] for i in ids) for ids in enumerate_spanning_trees(k, t, h, limit)}


# ---------------------------------------------------------------------------
# SVG


def peano_svg(cfg: PeanoConfig, T: SpanningTree | None = None, gamma: PeanoPath | None = None,
              px: float = 4.0) -> str:
    """Tree (black), dual tree (grey), boundary arcs and the Peano curve (red) as SVG."""
    lo, hi = cfg.bbox
    W = (hi[0] - lo[0]) * px / 4
    H = (hi[1] - lo[1]) * px / 4
    X = lambda x: (x - lo[0]) * px / 4
    Y = lambda y: (hi[1] - y) * px / 4
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W:.0f}" height="{H:.0f}" '
             f'viewBox="0 0 {W:.2f} {H:.2f}">', '<rect width="100%" height="100%" fill="white"/>']

    def segs(mids, ends, color, width):
        out = []
        for m in mids:
            (x0, y0), (x1, y1) = ends(m)
            out.append(f"M{X(x0):.2f},{Y(y0):.2f}L{X(x1):.2f},{Y(y1):.2f}")
        if out:
            parts.append(f'<path d="{"".join(out)}" stroke="{color}" stroke-width="{width}" fill="none"/>')

    if T is not None:
        segs(sorted(dual_tree(T, cfg).edges), dual_edge_ends, "#999999", px / 8)
        segs(sorted(T.edges), primal_edge_ends, "black", px / 6)
    else:
        segs(map(tuple, cfg.beta_edges.tolist()), dual_edge_ends, "#999999", px / 8)
        segs(map(tuple, cfg.alpha_edges.tolist()), primal_edge_ends, "black", px / 6)
    if gamma is not None:
        pts = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in gamma.vertices.tolist())
        parts.append(f'<polyline points="{pts}" stroke="red" stroke-width="{px / 10}" fill="none"/>')
    parts.append("</svg>")
    return "\n".join(parts)
