"""Wilson's algorithm for weighted spanning trees and spanning arborescences."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .walks import _pick


@dataclass(frozen=True)
class SpanningTree:
    """Spanning tree given by its edge keys.

    Attributes
    ----------
    edges : frozenset
        Edge keys: ``(u, v)`` label pairs for generic graphs (ordered by
        vertex index), or edge-pair midpoints for Peano configurations.
    root : object
        Root vertex or the label of the contracted wired component.
    edge_ids : tuple
        Sorted input edge indices (distinguishes parallel edges).
    """

    edges: frozenset
    root: object = None
    edge_ids: tuple = ()
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __len__(self):
        return len(self.edges)

    def to_json(self) -> str:
        return json.dumps({"root": _jsonable(self.root),
                           "edges": sorted(_jsonable(e) for e in self.edges)})


@dataclass(frozen=True)
class Arborescence:
    """Spanning arborescence: ``parent[v]`` is the head of the edge leaving ``v``."""

    parent: tuple
    root: int

    @property
    def edges(self) -> frozenset:
        return frozenset((v, p) for v, p in enumerate(self.parent) if v != self.root)


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(y) for y in x]
    if isinstance(x, np.integer):
        return int(x)
    return x


# ---------------------------------------------------------------------------
# engine


@numba.njit(cache=True)
def _wilson_kernel(indptr, nbr, cum, order, in_tree, rng):
    """Cycle-popping form of Wilson's algorithm; returns the chosen CSR slot per vertex."""
    n = len(indptr) - 1
    slot = -np.ones(n, dtype=np.int64)
    for s in order:
        u = s
        while not in_tree[u]:
            a = indptr[u]
            k = a + _pick(cum[a: indptr[u + 1]], rng.random())
            slot[u] = k
            u = nbr[k]
        u = s
        while not in_tree[u]:
            in_tree[u] = True
            u = nbr[slot[u]]
    return slot


@numba.njit(cache=True)
def _wilson_batch(indptr, nbr, cum, order, roots, rng, n_samples):
    n = len(indptr) - 1
    out = np.empty((n_samples, n), dtype=np.int64)
    for s in range(n_samples):
        in_tree = np.zeros(n, dtype=np.bool_)
        for r in roots:
            in_tree[r] = True
        out[s] = _wilson_kernel(indptr, nbr, cum, order, in_tree, rng)
    return out


def _row_cumulative(indptr, weights):
    cum = np.empty(len(weights))
    for u in range(len(indptr) - 1):
        a, b = indptr[u], indptr[u + 1]
        if b > a:
            c = np.cumsum(weights[a:b])
            cum[a:b] = c / c[-1]
            cum[b - 1] = 1.0
    return cum


@dataclass
class WilsonGraph:
    """CSR walk data: ``nbr[k]`` is the head and ``eid[k]`` the input edge of slot ``k``."""

    indptr: np.ndarray
    nbr: np.ndarray
    eid: np.ndarray
    cum: np.ndarray

    @classmethod
    def undirected(cls, n: int, tails, heads, weights=None) -> "WilsonGraph":
        tails = np.asarray(tails, dtype=np.int64)
        heads = np.asarray(heads, dtype=np.int64)
        w = np.ones(len(tails)) if weights is None else np.asarray(weights, dtype=float)
        ids = np.arange(len(tails))
        src = np.concatenate([tails, heads])
        dst = np.concatenate([heads, tails])
        ww = np.concatenate([w, w])
        ee = np.concatenate([ids, ids])
        o = np.argsort(src, kind="stable")
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        return cls(indptr, dst[o], ee[o], _row_cumulative(indptr, ww[o]))

    def run(self, order, roots, rng) -> np.ndarray:
        in_tree = np.zeros(len(self.indptr) - 1, dtype=np.bool_)
        in_tree[np.asarray(roots, dtype=np.int64)] = True
        return _wilson_kernel(self.indptr, self.nbr, self.cum,
                              np.asarray(order, dtype=np.int64), in_tree, rng)

    def run_many(self, order, roots, rng, n_samples: int) -> np.ndarray:
        """Chosen slots for ``n_samples`` independent runs, shape ``(n_samples, n)``."""
        return _wilson_batch(self.indptr, self.nbr, self.cum, np.asarray(order, dtype=np.int64),
                             np.asarray(roots, dtype=np.int64), rng, int(n_samples))


def _normalize_graph(graph):
    """Labels, tails, heads and weights from a networkx-like graph or an edge list."""
    if hasattr(graph, "edges") and hasattr(graph, "nodes"):
        labels = list(graph.nodes())
        elist = [(u, v, d.get("weight", 1.0)) for u, v, d in graph.edges(data=True)]
    else:
        elist = []
        for e in graph:
            elist.append((e[0], e[1], e[2] if len(e) > 2 else 1.0))
        labels = []
        seen = set()
        for u, v, _ in elist:
            for x in (u, v):
                if x not in seen:
                    seen.add(x)
                    labels.append(x)
    index = {x: i for i, x in enumerate(labels)}
    tails = np.array([index[u] for u, _, _ in elist], dtype=np.int64)
    heads = np.array([index[v] for _, v, _ in elist], dtype=np.int64)
    w = np.array([float(x) for _, _, x in elist])
    return labels, index, tails, heads, w


def _check_connected(n, tails, heads):
    if n == 0:
        raise ValueError("empty graph")
    g = sp.coo_matrix((np.ones(len(tails)), (tails, heads)), shape=(n, n))
    k, _ = connected_components(g, directed=False)
    if k != 1:
        raise ValueError("graph is not connected")


class UstSampler:
    """Prepared Wilson sampler for a fixed graph, root and vertex order.

    Parameters
    ----------
    graph : networkx-like graph or iterable of ``(u, v[, weight])``
        Connected; weights positive. Parallel edges are allowed in edge lists.
    root : vertex label, optional
        Initial tree; defaults to the first vertex of ``vertex_order``.
    vertex_order : sequence of labels, optional
        Order in which loop-erased walks are started.
    """

    def __init__(self, graph, root=None, vertex_order=None):
        labels, index, tails, heads, w = _normalize_graph(graph)
        n = len(labels)
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive")
        _check_connected(n, tails, heads)
        self.labels, self.tails, self.heads = labels, tails, heads
        self.order = np.array([index[x] for x in vertex_order] if vertex_order is not None else range(n),
                              dtype=np.int64)
        self.root = index[root] if root is not None else int(self.order[0])
        self.graph = WilsonGraph.undirected(n, tails, heads, w)

    def edge_ids(self, rng, n_samples: int) -> np.ndarray:
        """Sorted tree edge indices, one row per sample."""
        slots = self.graph.run_many(self.order, [self.root], rng, n_samples)
        keep = np.arange(len(self.labels)) != self.root
        return np.sort(self.graph.eid[slots[:, keep]], axis=1)

    def tree(self, ids) -> SpanningTree:
        ids = tuple(int(i) for i in ids)
        edges = frozenset(_edge_key(self.labels, self.tails[i], self.heads[i]) for i in ids)
        return SpanningTree(edges, self.labels[self.root], ids)

    def sample(self, rng) -> SpanningTree:
        return self.tree(self.edge_ids(rng, 1)[0])


def wilson_ust(graph, root=None, vertex_order=None, rng: np.random.Generator | None = None) -> SpanningTree:
    """Random spanning tree with law proportional to the product of edge weights.

    Loop-erased walks from the vertices in ``vertex_order`` are attached to
    the growing tree, starting from ``root``. See :class:`UstSampler`.
    """
    rng = rng if rng is not None else np.random.default_rng()
    return UstSampler(graph, root, vertex_order).sample(rng)


def _edge_key(labels, i, j):
    return (labels[i], labels[j]) if i <= j else (labels[j], labels[i])


def wilson_arborescence(P, root: int, rng: np.random.Generator | None = None,
                        order=None, n_samples: int | None = None):
    """Spanning arborescence toward ``root`` with law proportional to the product of ``P[v, parent(v)]``.

    Parameters
    ----------
    P : array_like or sparse matrix, shape (n, n)
        Transition matrix; rows sum to 1.
    root : int
    n_samples : int, optional
        When given, return an ``(n_samples, n)`` array of parent vectors
        instead of a single :class:`Arborescence`.
    """
    rng = rng if rng is not None else np.random.default_rng()
    P = sp.csr_matrix(P, dtype=float)
    P.eliminate_zeros()
    n = P.shape[0]
    if np.any(P.data < 0) or not np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-9):
        raise ValueError("P must be a stochastic matrix")
    reach = breadth_first_order(P.T.tocsr(), root, directed=True, return_predecessors=False)
    if len(reach) != n:
        raise ValueError("root is not reachable from every state")
    indptr = P.indptr.astype(np.int64)
    G = WilsonGraph(indptr, P.indices.astype(np.int64), np.arange(P.nnz), _row_cumulative(indptr, P.data))
    order = np.arange(n) if order is None else np.asarray(order)
    if n_samples is None:
        slot = G.run(order, [root], rng)
        return Arborescence(tuple(int(G.nbr[slot[v]]) if v != root else root for v in range(n)), int(root))
    slots = G.run_many(order, [root], rng, n_samples)
    par = G.nbr[np.maximum(slots, 0)]
    par[:, root] = root
    return par


# ---------------------------------------------------------------------------
# exact enumeration


def count_spanning_trees(n: int, tails, heads, weights=None) -> float:
    """Weighted spanning tree count by the matrix-tree theorem."""
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    w = np.ones(len(tails)) if weights is None else np.asarray(weights, dtype=float)
    L = np.zeros((n, n))
    keep = tails != heads
    np.add.at(L, (tails[keep], heads[keep]), -w[keep])
    np.add.at(L, (heads[keep], tails[keep]), -w[keep])
    L[np.diag_indices(n)] = -L.sum(axis=1)
    if n <= 1:
        return 1.0
    return float(np.linalg.det(L[1:, 1:]))


def enumerate_spanning_trees(n: int, tails, heads, limit: int = 10**5) -> list:
    """All spanning trees as sorted tuples of edge indices (self-loops never used)."""
    tails = [int(x) for x in tails]
    heads = [int(x) for x in heads]
    m = len(tails)
    cnt = count_spanning_trees(n, tails, heads)
    if cnt > limit + 0.5:
        raise ValueError(f"{cnt:.0f} spanning trees exceed the limit {limit}")
    out = []

    def find(parent, x):
        while parent[x] != x:
            x = parent[x]
        return x

    def spans(parent, start):
        par = parent[:]
        for i in range(start, m):
            a, b = find(par, tails[i]), find(par, heads[i])
            if a != b:
                par[a] = b
        return len({find(par, x) for x in range(n)}) == 1

    def rec(i, parent, chosen):
        if len(chosen) == n - 1:
            out.append(tuple(chosen))
            return
        if i == m:
            return
        a, b = find(parent, tails[i]), find(parent, heads[i])
        if a != b:
            par = parent[:]
            par[a] = b
            rec(i + 1, par, chosen + [i])
        if spans(parent, i + 1):
            rec(i + 1, parent, chosen)

    if n == 1:
        return [()]
    rec(0, list(range(n)), [])
    return out


def enumerate_arborescences(P, root: int) -> list:
    """All arborescences toward ``root`` with their weights ``prod P[v, parent(v)]``."""
    P = np.asarray(sp.csr_matrix(P).toarray())
    n = P.shape[0]
    choices = [[root] if v == root else [u for u in range(n) if u != v and P[v, u] > 0] for v in range(n)]
    out = []

    def ok(par):
        for v in range(n):
            seen = 0
            u = v
            while u != root:
                u = par[u]
                seen += 1
                if seen > n:
                    return False
        return True

    def rec(v, par):
        if v == n:
            if ok(par):
                w = float(np.prod([P[x, par[x]] for x in range(n) if x != root]))
                out.append((tuple(par), w))
            return
        for c in choices[v]:
            rec(v + 1, par + [c])

    rec(0, [])
    return out
