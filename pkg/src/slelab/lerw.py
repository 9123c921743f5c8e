"""Chronological loop erasure and loop-erased random walk sampling."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numba
import numpy as np
from scipy import stats

from .lattice import GridDomain, LatticeWalkSpec, square_walk
from .walks import (WalkPath, _kernel_args, _pick, _require_interior, _walk_kernel, green_column, hitting_column,
                    sample_walk, visit_probability, walk_operator)


@dataclass
class LoopErasedPath:
    """Simple lattice path ``vertices[0], ..., vertices[-1]``.

    ``orientation`` is ``"forward"`` (from the walk's start to the boundary)
    or ``"reversed"`` (from the boundary to the start).
    """

    vertices: np.ndarray
    source_walk_length: int
    orientation: str = "forward"

    def __len__(self):
        return len(self.vertices)

    def to_json(self) -> str:
        return json.dumps({"orientation": self.orientation,
                           "source_walk_length": int(self.source_walk_length),
                           "vertices": np.asarray(self.vertices).tolist()})


@dataclass
class WalkDecomposition:
    """Walk ``Gamma`` from 0 to the boundary split along ``gamma = LE(reverse(Gamma))``.

    ``hit_times[j]`` is the first time ``Gamma`` visits ``gamma[j]``; the
    ``j``-th loop is ``Gamma[hit_times[j], hit_times[j - 1]]``.
    """

    walk: np.ndarray
    gamma: LoopErasedPath
    hit_times: np.ndarray

    @property
    def loops(self) -> list:
        n = self.hit_times
        return [self.walk[n[j]: n[j - 1] + 1] for j in range(1, len(n))]

    def reassemble(self) -> np.ndarray:
        """Concatenate the loops from the last one to the first."""
        loops = self.loops
        parts = [loops[-1]] + [lp[1:] for lp in reversed(loops[:-1])]
        return np.concatenate(parts) if parts else self.walk[:1]


def _codes(verts: np.ndarray):
    lo = verts.min(axis=0)
    w = int(verts[:, 1].max() - lo[1] + 1)
    c = (verts[:, 0] - lo[0]) * w + (verts[:, 1] - lo[1])
    size = int(c.max()) + 1
    return c.astype(np.int64), size


@numba.njit(cache=True)
def _erase_forward(code, size):
    T = len(code) - 1
    last = -np.ones(size, dtype=np.int64)
    for t in range(T + 1):
        last[code[t]] = t
    out = np.empty(T + 1, dtype=np.int64)
    i = 0
    k = 0
    while True:
        out[k] = i
        k += 1
        j = last[code[i]]
        if j >= T:
            break
        i = j + 1
    return out[:k]


@numba.njit(cache=True)
def _erase_reversed(code, size):
    """Indices ``n_j`` of ``LE(reverse)``: first-visit times, strictly decreasing."""
    T = len(code) - 1
    first = -np.ones(size, dtype=np.int64)
    for t in range(T + 1):
        if first[code[t]] < 0:
            first[code[t]] = t
    out = np.empty(T + 1, dtype=np.int64)
    i = first[code[T]]
    k = 0
    while True:
        out[k] = i
        k += 1
        if i == 0:
            break
        i = first[code[i - 1]]
    return out[:k]


def _as_vertices(walk) -> np.ndarray:
    if isinstance(walk, WalkPath):
        return walk.full
    v = np.asarray(walk, dtype=np.int64)
    if v.ndim == 1:
        v = v.reshape(-1, 2)
    return v


def loop_erase(walk) -> LoopErasedPath:
    """Chronological loop erasure.

    ``beta_0 = Gamma(0)`` and ``beta_{n+1} = Gamma(k)`` with ``k`` one past
    the last visit to ``beta_n``; stops once the final vertex is reached.

    Parameters
    ----------
    walk : WalkPath or array_like, shape (T + 1, 2)
        A :class:`WalkPath` contributes its exit endpoint as the final vertex.
    """
    v = _as_vertices(walk)
    if len(v) == 0:
        raise ValueError("empty walk")
    code, size = _codes(v)
    idx = _erase_forward(code, size)
    return LoopErasedPath(v[idx], len(v) - 1, "forward")


def loop_erase_naive(walk) -> np.ndarray:
    """Quadratic reference erasure: cut the loop each time a vertex repeats."""
    path = []
    for p in _as_vertices(walk).tolist():
        p = tuple(p)
        if p in path:
            path = path[: path.index(p) + 1]
        else:
            path.append(p)
    return np.array(path, dtype=np.int64).reshape(-1, 2)


def decompose(walk) -> WalkDecomposition:
    """Split a walk along the loop erasure of its time reversal.

    The final vertex must not occur earlier in the walk, as for a walk
    stopped on leaving a domain.
    """
    v = _as_vertices(walk)
    code, size = _codes(v)
    if np.any(code[:-1] == code[-1]):
        raise ValueError("the final vertex of the walk is visited before the end")
    n = _erase_reversed(code, size)
    gamma = LoopErasedPath(v[n], len(v) - 1, "reversed")
    return WalkDecomposition(v, gamma, n)


def sample_lerw_reversed(D: GridDomain, spec: LatticeWalkSpec | None = None,
                         rng: np.random.Generator | None = None) -> WalkDecomposition:
    """Walk from 0 to the boundary, decomposed along ``LE(reverse walk)``.

    ``gamma[0]`` is the outer endpoint of the exit edge and ``gamma[-1] = 0``.
    """
    w = sample_walk(D, (0, 0), spec, rng)
    return decompose(w)


# ---------------------------------------------------------------------------
# conditioned sampling


def _pair_row(D: GridDomain, exit) -> int:
    e = np.asarray(exit)
    if e.ndim == 0:
        return int(e)
    k = D.pair_index.get(tuple(int(c) for c in e))
    if k is None:
        raise ValueError("not a boundary pair of the domain")
    return k


def conditioned_table(D: GridDomain, spec: LatticeWalkSpec, exit: int):
    """Cumulative step tables for the walk conditioned to exit through pair ``exit``.

    Returns
    -------
    cum : ndarray, shape (n, K)
        Cumulative transition probabilities of the h-transformed walk.
    h : ndarray
        ``H(x, exit)`` over the interior.
    """
    h = hitting_column(D, exit, spec)
    offs = spec.offsets
    probs = spec.probs
    pair = D.boundary_pairs[exit]
    W = np.zeros((D.n, len(offs)))
    for k, (o, p) in enumerate(zip(offs, probs)):
        j = D.indices_of(D.interior + o)
        inside = j >= 0
        W[inside, k] = p * h[j[inside]]
        hit = np.all(D.interior == pair[:2], axis=1) & np.all(o == pair[2:] - pair[:2])
        W[hit, k] = p
    tot = W.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cum = np.cumsum(W, axis=1) / tot[:, None]
    cum[tot == 0] = 1.0
    cum[:, -1] = 1.0
    return cum, h


@numba.njit(cache=True)
def _conditioned_kernel(idx, x, y, ox, oy, cum, rng, cap):
    n = 1024
    buf = np.empty((n, 2), dtype=np.int64)
    buf[0, 0] = x
    buf[0, 1] = y
    L = 1
    while True:
        k = _pick(cum[idx[x, y]], rng.random())
        nx = x + ox[k]
        ny = y + oy[k]
        if idx[nx, ny] < 0:
            return buf[:L], nx, ny, L
        if L >= cap:
            return buf[:L], nx, ny, -1
        x = nx
        y = ny
        if L == n:
            nb = np.empty((2 * n, 2), dtype=np.int64)
            nb[:n] = buf
            buf = nb
            n *= 2
        buf[L, 0] = x
        buf[L, 1] = y
        L += 1


def sample_conditioned_walk(D: GridDomain, spec: LatticeWalkSpec | None, exit,
                            rng: np.random.Generator, start=(0, 0), table=None) -> WalkPath:
    """Walk from ``start`` conditioned to leave ``D`` through boundary pair ``exit``."""
    spec = spec or square_walk()
    k = _pair_row(D, exit)
    cum, h = table if table is not None else conditioned_table(D, spec, k)
    s_idx = _require_interior(D, start)
    if not h[s_idx] > 0:
        raise ValueError("exit pair has zero hitting probability")
    idx, lo, ox, oy, _ = _kernel_args(D, spec)
    s = np.asarray(start, dtype=np.int64) - lo
    buf, nx, ny, L = _conditioned_kernel(idx, int(s[0]), int(s[1]), ox, oy, cum, rng, 10**9)
    if L < 0:
        raise RuntimeError("conditioned walk exceeded the step cap")
    verts = buf + lo
    last = verts[-1]
    return WalkPath(verts, np.array([last[0], last[1], nx + lo[0], ny + lo[1]], dtype=np.int64))


def sample_lerw_conditioned(D: GridDomain, spec: LatticeWalkSpec | None, exit,
                            rng: np.random.Generator, table=None) -> WalkDecomposition:
    """Reversed-LERW decomposition of the walk from 0 conditioned to exit through ``exit``.

    The conditioning uses the exact h-transform with ``h = H(., exit)``.
    """
    return decompose(sample_conditioned_walk(D, spec, exit, rng, table=table))


@numba.njit(cache=True)
def _conditioned_batch(idx, x0, y0, ox, oy, cum, rng, n, ux, uy, vx, vy):
    """Per sample: first step, ``n_1``, step taken at ``n_1``, visits to ``v`` from ``n_1`` on."""
    out = np.empty((n, 4), dtype=np.int64)
    for s in range(n):
        x = x0
        y = y0
        t = 0
        n1 = -1
        k1 = -1
        k0 = -1
        vis = 0
        while True:
            if n1 < 0 and x == ux and y == uy:
                n1 = t
            if n1 >= 0 and x == vx and y == vy:
                vis += 1
            k = _pick(cum[idx[x, y]], rng.random())
            if t == 0:
                k0 = k
            if t == n1:
                k1 = k
            x += ox[k]
            y += oy[k]
            t += 1
            if idx[x, y] < 0:
                break
        out[s, 0] = k0
        out[s, 1] = n1
        out[s, 2] = k1
        out[s, 3] = vis
    return out


def conditioned_batch(D: GridDomain, spec: LatticeWalkSpec | None, exit, n: int,
                      rng: np.random.Generator, v=(0, 0), start=(0, 0)) -> np.ndarray:
    """Summaries of ``n`` walks conditioned to exit through ``exit``.

    Columns: first-step offset index, ``n_1`` (first visit to the exit pair's
    inner vertex), offset index of the step taken at ``n_1``, and visits to
    ``v`` during the first loop.
    """
    spec = spec or square_walk()
    k = _pair_row(D, exit)
    cum, h = conditioned_table(D, spec, k)
    if not h[_require_interior(D, start)] > 0:
        raise ValueError("exit pair has zero hitting probability")
    idx, lo, ox, oy, _ = _kernel_args(D, spec)
    u = D.boundary_pairs[k, :2] - lo
    vv = np.asarray(v, dtype=np.int64) - lo
    s = np.asarray(start, dtype=np.int64) - lo
    return _conditioned_batch(idx, int(s[0]), int(s[1]), ox, oy, cum, rng, int(n),
                              int(u[0]), int(u[1]), int(vv[0]), int(vv[1]))


# ---------------------------------------------------------------------------
# checks


def expected_visits_check(D: GridDomain, spec: LatticeWalkSpec | None, u0, u1, v, n_samples: int,
                          rng: np.random.Generator, method: str = "exact") -> dict:
    """Compare ``E[visits to v by the first loop | gamma_0, gamma_1]`` with ``G(u1, v) H(v, u1)``.

    Parameters
    ----------
    u0 : boundary pair (row or index)
        Conditioning exit pair; ``gamma_1`` is then its inner vertex.
    u1 : vertex
    v : vertex
    method : {"exact", "rejection"}
        ``"exact"`` samples the conditioned walk directly; ``"rejection"``
        keeps unconditioned walks that exit through ``u0``.
    """
    spec = spec or square_walk()
    k = _pair_row(D, u0)
    pair = D.boundary_pairs[k]
    u1 = np.asarray(u1, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    exact = float(green_column(D, v, spec)[_require_interior(D, u1)] * visit_probability(D, v, u1, spec))
    report = {"exact": exact, "n": 0, "estimate": float("nan"), "stderr": float("nan"), "inconclusive": False}
    if not np.array_equal(pair[:2], u1):
        report["inconclusive"] = True
        report["reason"] = "gamma_1 is the inner vertex of the exit pair; event has probability 0"
        return report
    counts = []
    if method == "exact":
        counts = conditioned_batch(D, spec, k, n_samples, rng, v=v)[:, 3].tolist()
    tries = 0
    while len(counts) < n_samples and tries < 50 * n_samples:
        tries += 1
        dec = sample_lerw_reversed(D, spec, rng)
        if not np.array_equal(dec.walk[-2:].ravel(), pair):
            continue
        n1 = dec.hit_times[1]
        loop = dec.walk[n1:-1]
        counts.append(int(np.sum(np.all(loop == v, axis=1))))
    if not counts:
        report["inconclusive"] = True
        report["reason"] = "conditioning event never sampled"
        return report
    c = np.asarray(counts, dtype=float)
    report.update(n=len(c), estimate=float(c.mean()), stderr=float(c.std(ddof=1) / np.sqrt(len(c))) if len(c) > 1 else float("nan"))
    return report


def markov_independence_test(D: GridDomain, spec: LatticeWalkSpec | None, exit, n_samples: int,
                             rng: np.random.Generator, buckets=(1, 2, 4, 8)) -> dict:
    """Chi-square test that the first loop's second vertex is independent of ``n_1``.

    Walks are conditioned to exit through ``exit``; ``n_1`` (first visit to
    ``gamma_1``) is bucketed by ``buckets`` and crossed with the vertex that
    follows ``gamma_1`` in the first loop.
    """
    spec = spec or square_walk()
    out = conditioned_batch(D, spec, exit, n_samples, rng)
    b = np.searchsorted(np.asarray(buckets), out[:, 1], side="right")
    K = len(spec.offsets)
    tab = np.zeros((len(buckets) + 1, K), dtype=np.int64)
    np.add.at(tab, (b, out[:, 2]), 1)
    tab = tab[tab.sum(axis=1) > 0][:, tab.sum(axis=0) > 0]
    if tab.shape[0] < 2 or tab.shape[1] < 2:
        return {"p_value": 1.0, "table": tab.tolist(), "n": n_samples}
    chi2, p, dof, _ = stats.chi2_contingency(tab)
    return {"p_value": float(p), "chi2": float(chi2), "dof": int(dof), "table": tab.tolist(), "n": n_samples}


@numba.njit(cache=True)
def _turn(a, b, c):
    d1x = b[0] - a[0]
    d1y = b[1] - a[1]
    d2x = c[0] - b[0]
    d2y = c[1] - b[1]
    cr = d1x * d2y - d1y * d2x
    if cr > 0:
        return 1
    if cr < 0:
        return 2
    return 0


@numba.njit(cache=True)
def _features(px, py, L, max_len_bucket):
    t1 = 3
    t2 = 3
    if L >= 2:
        t1 = _turn((px[0], py[0]), (px[1], py[1]), (px[2], py[2]))
    if L >= 3:
        t2 = _turn((px[1], py[1]), (px[2], py[2]), (px[3], py[3]))
    lb = min(int(np.log2(max(L, 1)) * 2), max_len_bucket)
    return lb, 4 * t1 + t2


@numba.njit(cache=True)
def _reversal_batch(idx, x0, y0, ox, oy, cum, rng, n, reverse_first):
    """Features of ``LE(reverse walk)`` (``reverse_first``) or ``reverse(LE(walk))``."""
    W, H = idx.shape
    mark = -np.ones((W, H), dtype=np.int64)
    out = np.empty((n, 2), dtype=np.int64)
    for s in range(n):
        buf, nx, ny, steps = _walk_kernel(idx, x0, y0, ox, oy, cum, rng, 1 << 40)
        T = len(buf)
        wx = np.empty(T + 1, dtype=np.int64)
        wy = np.empty(T + 1, dtype=np.int64)
        wx[:T] = buf[:, 0]
        wy[:T] = buf[:, 1]
        wx[T] = nx
        wy[T] = ny
        px = np.empty(T + 1, dtype=np.int64)
        py = np.empty(T + 1, dtype=np.int64)
        m = 0
        if reverse_first:
            for t in range(T, -1, -1):
                mark[wx[t], wy[t]] = t
            i = T
            while True:
                px[m] = wx[i]
                py[m] = wy[i]
                m += 1
                if i == 0:
                    break
                i = mark[wx[i - 1], wy[i - 1]]
        else:
            for t in range(T + 1):
                mark[wx[t], wy[t]] = t
            i = 0
            while True:
                px[m] = wx[i]
                py[m] = wy[i]
                m += 1
                j = mark[wx[i], wy[i]]
                if j >= T:
                    break
                i = j + 1
            px[:m] = px[:m][::-1].copy()
            py[:m] = py[:m][::-1].copy()
        for t in range(T + 1):
            mark[wx[t], wy[t]] = -1
        lb, tc = _features(px, py, m - 1, 40)
        out[s, 0] = lb
        out[s, 1] = tc
    return out


def reversal_test(D: GridDomain, spec: LatticeWalkSpec | None, n_samples: int,
                  rng: np.random.Generator) -> dict:
    """Two-sample chi-square test: ``LE(reverse walk)`` vs. ``reverse(LE(walk))``.

    The first interior vertex is pinned to the exit edge in both, so the
    compared features are the path length bucket and the next two turns
    seen from the boundary end.
    """
    spec = spec or square_walk()
    idx, lo, ox, oy, cum = _kernel_args(D, spec)
    x0, y0 = int(-lo[0]), int(-lo[1])
    fa = _reversal_batch(idx, x0, y0, ox, oy, cum, rng, int(n_samples), True)
    fb = _reversal_batch(idx, x0, y0, ox, oy, cum, rng, int(n_samples), False)
    out = {}
    for name, col in (("length", 0), ("turns", 1)):
        a = fa[:, col]
        b = fb[:, col]
        cats = np.union1d(a, b)
        tab = np.stack([np.array([(a == c).sum() for c in cats]), np.array([(b == c).sum() for c in cats])])
        tab = _merge_sparse_columns(tab, 5)
        chi2, p, dof, _ = stats.chi2_contingency(tab)
        out[name] = {"p_value": float(p), "chi2": float(chi2), "dof": int(dof)}
    out["p_value"] = min(out["length"]["p_value"], out["turns"]["p_value"])
    out["n"] = n_samples
    return out


def _merge_sparse_columns(tab: np.ndarray, min_count: int) -> np.ndarray:
    """Pool adjacent categories until each column total reaches ``min_count``."""
    cols, acc = [], np.zeros(tab.shape[0], dtype=np.int64)
    for j in range(tab.shape[1]):
        acc = acc + tab[:, j]
        if acc.sum() >= min_count * tab.shape[0]:
            cols.append(acc)
            acc = np.zeros(tab.shape[0], dtype=np.int64)
    if acc.sum() > 0:
        if cols:
            cols[-1] = cols[-1] + acc
        else:
            cols.append(acc)
    return np.stack(cols, axis=1)


def step_law_check(D: GridDomain, spec: LatticeWalkSpec | None, exit, n_samples: int,
                   rng: np.random.Generator) -> dict:
    """Empirical first step of the conditioned walk vs. ``p H(0 + e, exit) / H(0, exit)``."""
    spec = spec or square_walk()
    k = _pair_row(D, exit)
    h = hitting_column(D, k, spec)
    pair = D.boundary_pairs[k]
    probs = np.zeros(len(spec.offsets))
    for j, (o, p) in enumerate(zip(spec.offsets, spec.probs)):
        y = o
        i = D.index_of(y)
        if i >= 0:
            probs[j] = p * h[i]
        elif np.array_equal(pair, [0, 0, y[0], y[1]]):
            probs[j] = p
    probs /= h[D.index_of((0, 0))]
    counts = np.bincount(conditioned_batch(D, spec, k, n_samples, rng)[:, 0], minlength=len(probs))
    freq = counts / n_samples
    se = np.sqrt(np.maximum(probs * (1 - probs), 1e-300) / n_samples)
    return {"expected": probs, "observed": freq, "z": (freq - probs) / se, "n": n_samples}
