"""Boundary data for the mixed wired/free spanning tree and its Peano curve.

All coordinates are scaled by 4 so that they are exact integers:

* primal vertices ``(4i, 4j)``,
* dual vertices ``(4i + 2, 4j + 2)``,
* Peano vertices have both coordinates odd.

A primal edge and the dual edge crossing it share a midpoint, so an edge
pair is identified by that midpoint (one coordinate ``0 mod 4``, the other
``2 mod 4``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

PEANO_C = 10.0  # allowed distance between a boundary path and its continuous arc


def primal_of(p):
    """Primal vertex adjacent to Peano vertex ``p`` (scaled coordinates)."""
    p = np.asarray(p, dtype=np.int64)
    return 4 * np.floor_divide(p + 2, 4)


def dual_of(p):
    """Dual vertex adjacent to Peano vertex ``p`` (scaled coordinates)."""
    p = np.asarray(p, dtype=np.int64)
    return 4 * np.floor_divide(p, 4) + 2


def primal_edge_ends(m):
    """Endpoints of the primal edge with midpoint ``m``."""
    mx, my = int(m[0]), int(m[1])
    if mx % 4 == 2:
        return (mx - 2, my), (mx + 2, my)
    return (mx, my - 2), (mx, my + 2)


def dual_edge_ends(m):
    """Endpoints of the dual edge with midpoint ``m``."""
    mx, my = int(m[0]), int(m[1])
    if mx % 4 == 2:
        return (mx, my - 2), (mx, my + 2)
    return (mx - 2, my), (mx + 2, my)


def _nearest_with_residue(y, r):
    """Even integer ``y +- 1`` congruent to ``r`` mod 4 (``y`` odd)."""
    y = np.asarray(y, dtype=np.int64)
    return np.where((y - 1 - r) % 4 == 0, y - 1, y + 1)


def crossing_midpoint(p, q):
    """Edge pair crossed by the Manhattan step ``p -> q`` (both Peano vertices)."""
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    c = (p + q) // 2
    horizontal = p[..., 1] == q[..., 1]
    cx, cy = c[..., 0], c[..., 1]
    mh_y = _nearest_with_residue(cy, (cx + 2) % 4)
    mv_x = _nearest_with_residue(cx, (cy + 2) % 4)
    mx = np.where(horizontal, cx, mv_x)
    my = np.where(horizontal, mh_y, cy)
    return np.stack([mx, my], axis=-1)


def crosses_primal(p, q):
    """True when the step ``p -> q`` crosses a primal edge (else a dual edge)."""
    p = np.asarray(p, dtype=np.int64)
    q = np.asarray(q, dtype=np.int64)
    c = (p + q) // 2
    horizontal = p[..., 1] == q[..., 1]
    line = np.where(horizontal, c[..., 0], c[..., 1])
    return line % 4 == 0


def manhattan_out(p):
    """The two oriented out-steps of Peano vertex ``p``: (horizontal, vertical) targets."""
    p = np.asarray(p, dtype=np.int64)
    sx = np.where(p[..., 1] % 4 == 1, 2, -2)
    sy = np.where(p[..., 0] % 4 == 1, -2, 2)
    h = p.copy()
    h[..., 0] += sx
    v = p.copy()
    v[..., 1] += sy
    return h, v


def is_manhattan_step(p, q) -> bool:
    h, v = manhattan_out(p)
    q = np.asarray(q)
    return bool(np.array_equal(h, q) or np.array_equal(v, q))


class MidGrid:
    """Boolean table over even coordinates in a bounding box (edge-pair midpoints, vertices)."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=np.int64) - (np.asarray(lo) % 2)
        hi = np.asarray(hi, dtype=np.int64)
        self.shape = tuple((hi - self.lo) // 2 + 1)
        self.data = np.zeros(self.shape, dtype=np.bool_)

    def _k(self, pts):
        pts = np.asarray(pts, dtype=np.int64).reshape(-1, 2)
        return (pts - self.lo) // 2

    def set(self, pts, value=True):
        k = self._k(pts)
        if len(k):
            self.data[k[:, 0], k[:, 1]] = value

    def get(self, pts):
        k = self._k(pts)
        ok = np.all((k >= 0) & (k < np.array(self.shape)), axis=1)
        out = np.zeros(len(k), dtype=bool)
        out[ok] = self.data[k[ok, 0], k[ok, 1]]
        return out


@dataclass(frozen=True, eq=False)
class PeanoConfig:
    """Boundary data ``(alpha, beta, a, b)``.

    Attributes
    ----------
    alpha_vertices, alpha_edges : ndarray
        Primal tree: vertices ``(k, 2)`` and edge midpoints ``(k - 1, 2)``.
    beta_vertices, beta_edges : ndarray
        Dual tree, same layout.
    a, b : ndarray
        Start and end Peano vertices.
    """

    alpha_vertices: np.ndarray
    alpha_edges: np.ndarray
    beta_vertices: np.ndarray
    beta_edges: np.ndarray
    a: np.ndarray
    b: np.ndarray
    meta: dict = field(default_factory=dict)

    # --- derived structure -------------------------------------------------

    @cached_property
    def bbox(self):
        pts = np.concatenate([self.alpha_vertices, self.beta_vertices, self.a[None], self.b[None]])
        return pts.min(axis=0) - 8, pts.max(axis=0) + 8

    @cached_property
    def _region(self):
        return _flood_region(self)

    @property
    def peano_vertices(self) -> np.ndarray:
        """``V_P``: interior Peano vertices followed by ``a`` and ``b``."""
        inner = self._region["inner"]
        return np.concatenate([inner, self.a[None], self.b[None]])

    @property
    def interior_peano(self) -> np.ndarray:
        return self._region["inner"]

    @property
    def peano_vertex_count(self) -> int:
        """``ell``: number of Peano vertices other than ``a`` and ``b``."""
        return len(self._region["inner"])

    @property
    def region_ok(self) -> bool:
        return self._region["ok"]

    @cached_property
    def alpha_a(self):
        return primal_of(self.a)

    @cached_property
    def beta_a(self):
        return dual_of(self.a)

    @cached_property
    def alpha_b(self):
        return primal_of(self.b)

    @cached_property
    def beta_b(self):
        return dual_of(self.b)

    @cached_property
    def primal_vertices(self) -> np.ndarray:
        """Vertices of ``H(D)``: alpha plus primal vertices of the domain."""
        inner = self._region["inner"]
        pts = np.concatenate([self.alpha_vertices, primal_of(inner).reshape(-1, 2)])
        return np.unique(pts, axis=0)

    @cached_property
    def dual_vertices(self) -> np.ndarray:
        """Dual vertices in the closed domain: beta plus dual neighbours of interior Peano vertices."""
        inner = self._region["inner"]
        pts = np.concatenate([self.beta_vertices, dual_of(inner).reshape(-1, 2)])
        return np.unique(pts, axis=0)

    @cached_property
    def alpha_grid(self) -> MidGrid:
        g = MidGrid(*self.bbox)
        g.set(self.alpha_edges)
        return g

    @cached_property
    def beta_grid(self) -> MidGrid:
        g = MidGrid(*self.bbox)
        g.set(self.beta_edges)
        return g

    @cached_property
    def h_edges(self) -> np.ndarray:
        """Midpoints of the primal edges of ``H(D)`` (edges crossing beta removed)."""
        return _edges_between(self.primal_vertices, self.bbox, exclude=self.beta_grid)

    @cached_property
    def dual_edges(self) -> np.ndarray:
        """Midpoints of dual edges in the closed domain (edges crossing alpha removed)."""
        return _edges_between(self.dual_vertices, self.bbox, exclude=self.alpha_grid)

    def to_json(self) -> str:
        return json.dumps({
            "alpha_vertices": self.alpha_vertices.tolist(),
            "alpha_edges": self.alpha_edges.tolist(),
            "beta_vertices": self.beta_vertices.tolist(),
            "beta_edges": self.beta_edges.tolist(),
            "a": self.a.tolist(), "b": self.b.tolist(), "scale": 4, "meta": self.meta,
        })

    @classmethod
    def from_json(cls, text: str) -> "PeanoConfig":
        d = json.loads(text)
        arr = lambda k: np.array(d[k], dtype=np.int64).reshape(-1, 2)
        return cls(arr("alpha_vertices"), arr("alpha_edges"), arr("beta_vertices"),
                   arr("beta_edges"), np.array(d["a"], dtype=np.int64), np.array(d["b"], dtype=np.int64),
                   d.get("meta", {}))


def _edges_between(vertices, bbox, exclude: MidGrid) -> np.ndarray:
    g = MidGrid(*bbox)
    g.set(vertices)
    out = []
    for d in (np.array([4, 0]), np.array([0, 4])):
        w = vertices + d
        ok = g.get(w)
        mids = vertices[ok] + d // 2
        out.append(mids[~exclude.get(mids)])
    mids = np.concatenate(out)
    return mids[np.lexsort(mids.T[::-1])] if len(mids) else mids.reshape(0, 2)


def _flood_region(cfg: PeanoConfig) -> dict:
    """Peano vertices of the bounded region to the right of ``[alpha_a, beta_a]``."""
    lo, hi = cfg.bbox
    lo = lo - (lo % 2) + 1  # odd
    nx = (hi[0] - lo[0]) // 2 + 1
    ny = (hi[1] - lo[1]) // 2 + 1
    xs = lo[0] + 2 * np.arange(nx)
    ys = lo[1] + 2 * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    node = np.arange(nx * ny).reshape(nx, ny)
    banned = np.zeros((nx, ny), dtype=bool)
    for p in (cfg.a, cfg.b):
        k = (p - lo) // 2
        banned[k[0], k[1]] = True
    rows, cols = [], []
    for d in (np.array([2, 0]), np.array([0, 2])):
        sx, sy = d // 2
        P = np.stack([gx[: nx - sx, : ny - sy].ravel(), gy[: nx - sx, : ny - sy].ravel()], axis=1)
        Q = P + d
        m = crossing_midpoint(P, Q)
        prim = crosses_primal(P, Q)
        blocked = np.where(prim, cfg.alpha_grid.get(m), cfg.beta_grid.get(m))
        i = node[: nx - sx, : ny - sy].ravel()
        j = node[sx:, sy:].ravel()
        keep = ~blocked & ~banned.ravel()[i] & ~banned.ravel()[j]
        rows.append(i[keep])
        cols.append(j[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nx * ny, nx * ny))
    _, lab = connected_components(g, directed=False)

    a = cfg.a
    dvec = dual_of(a) - primal_of(a)
    right, left = [], []
    for step in ((2, 0), (-2, 0), (0, 2), (0, -2)):
        q = a + np.array(step)
        cr = dvec[0] * step[1] - dvec[1] * step[0]
        (right if cr < 0 else left).append(q)
    seeds = set()
    for q in right:
        if np.array_equal(q, cfg.b):
            continue
        m = crossing_midpoint(a, q)
        prim = bool(crosses_primal(a, q))
        blocked = cfg.alpha_grid.get(m[None])[0] if prim else cfg.beta_grid.get(m[None])[0]
        k = (q - lo) // 2
        if not blocked and 0 <= k[0] < nx and 0 <= k[1] < ny:
            seeds.add(int(lab[node[k[0], k[1]]]))
    mask = np.isin(lab, list(seeds)) & ~banned.ravel()
    inner = pts[mask]
    ok = True
    if len(inner):
        kk = (inner - lo) // 2
        if kk[:, 0].min() == 0 or kk[:, 1].min() == 0 or kk[:, 0].max() == nx - 1 or kk[:, 1].max() == ny - 1:
            ok = False
        for q in left:
            k = (q - lo) // 2
            if mask[node[k[0], k[1]]]:
                ok = False
    inner = inner[np.lexsort(inner.T[::-1])] if len(inner) else inner.reshape(0, 2)
    return {"inner": inner.astype(np.int64), "ok": ok}


# ---------------------------------------------------------------------------
# validation


def _is_tree(vertices, edges, ends) -> bool:
    vs = {tuple(v) for v in np.asarray(vertices).tolist()}
    if len(vs) == 0 or len(edges) != len(vs) - 1:
        return False
    parent = {v: v for v in vs}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in np.asarray(edges).tolist():
        u, w = ends(m)
        if u not in vs or w not in vs:
            return False
        ru, rw = find(u), find(w)
        if ru == rw:
            return False
        parent[ru] = rw
    return True


def validate_peano_config(cfg: PeanoConfig) -> dict:
    """Check every :class:`PeanoConfig` invariant; returns ``{check: bool}``."""
    rep = {}
    rep["alpha_is_primal_tree"] = bool(np.all(cfg.alpha_vertices % 4 == 0)) and _is_tree(
        cfg.alpha_vertices, cfg.alpha_edges, primal_edge_ends)
    rep["beta_is_dual_tree"] = bool(np.all(cfg.beta_vertices % 4 == 2)) and _is_tree(
        cfg.beta_vertices, cfg.beta_edges, dual_edge_ends)
    am = {tuple(m) for m in cfg.alpha_edges.tolist()}
    bm = {tuple(m) for m in cfg.beta_edges.tolist()}
    rep["alpha_beta_disjoint"] = len(am & bm) == 0
    av = {tuple(v) for v in cfg.alpha_vertices.tolist()}
    bv = {tuple(v) for v in cfg.beta_vertices.tolist()}
    odd = bool(np.all(cfg.a % 2 == 1) and np.all(cfg.b % 2 == 1))
    rep["endpoints_are_peano"] = odd and not np.array_equal(cfg.a, cfg.b)
    rep["endpoints_adjacent"] = odd and all(
        tuple(primal_of(p)) in av and tuple(dual_of(p)) in bv for p in (cfg.a, cfg.b))
    rep["region_bounded_right"] = bool(cfg.region_ok)
    if cfg.peano_vertex_count == 0:
        rep["region_bounded_right"] = rep["region_bounded_right"] and is_manhattan_step(cfg.a, cfg.b)
    return rep


# ---------------------------------------------------------------------------
# construction


def minimal_peano_config() -> PeanoConfig:
    """Config with no interior Peano vertex; the curve is the single step ``(a, b)``."""
    return PeanoConfig(
        alpha_vertices=np.array([[0, 0]], dtype=np.int64),
        alpha_edges=np.zeros((0, 2), dtype=np.int64),
        beta_vertices=np.array([[2, 2], [2, -2]], dtype=np.int64),
        beta_edges=np.array([[2, 0]], dtype=np.int64),
        a=np.array([1, 1], dtype=np.int64),
        b=np.array([1, -1], dtype=np.int64),
        meta={"kind": "minimal"},
    )


def swapped_config(cfg: PeanoConfig) -> PeanoConfig:
    """Exchange the roles of (alpha, a) and (beta, b).

    The point reflection through ``a`` maps primal vertices to dual vertices
    and reverses the Manhattan orientation, so the swapped data is again a
    configuration on the standard lattices. The centre is stored in
    ``meta["swap_center"]`` and reused, which makes the swap an involution.
    """
    c = np.asarray(cfg.meta.get("swap_center", cfg.a), dtype=np.int64)
    refl = lambda x: (2 * c - np.asarray(x)).astype(np.int64).reshape(-1, 2)
    return PeanoConfig(
        alpha_vertices=refl(cfg.beta_vertices),
        alpha_edges=refl(cfg.beta_edges),
        beta_vertices=refl(cfg.alpha_vertices),
        beta_edges=refl(cfg.alpha_edges),
        a=refl(cfg.b)[0],
        b=refl(cfg.a)[0],
        meta={**cfg.meta, "swapped": not cfg.meta.get("swapped", False), "swap_center": c.tolist()},
    )


def _shape_contains(shape: dict, z: np.ndarray) -> np.ndarray:
    kind = shape["kind"]
    if kind == "disk":
        return np.abs(z) < shape["radius"]
    if kind == "rect":
        x0, x1, y0, y1 = _rect_bounds(shape)
        return (z.real > x0) & (z.real < x1) & (z.imag > y0) & (z.imag < y1)
    raise ValueError(f"unknown shape {kind!r}")


def _rect_bounds(shape):
    w, h = int(shape["width"]), int(shape["height"])
    return -(w // 2), w - w // 2, -(h // 2), h - h // 2


def _boundary_polyline(shape: dict, n: int = 4000) -> np.ndarray:
    """Dense counterclockwise polyline of the continuous boundary."""
    if shape["kind"] == "disk":
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        return shape["radius"] * np.exp(1j * t)
    x0, x1, y0, y1 = _rect_bounds(shape)
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1), complex(x0, y0)]
    per = 2 * ((x1 - x0) + (y1 - y0))
    pts = []
    for c0, c1 in zip(corners[:-1], corners[1:]):
        k = max(2, int(n * abs(c1 - c0) / per))
        pts.append(c0 + (c1 - c0) * np.arange(k) / k)
    return np.concatenate(pts)


def _trace_cycle(squares: set) -> list:
    """Counterclockwise boundary cycle (primal vertices, lattice units) of a union of unit squares."""
    nxt = {}
    for (i, j) in squares:
        sides = (
            ((i, j - 1), (i, j), (i + 1, j)),
            ((i + 1, j), (i + 1, j), (i + 1, j + 1)),
            ((i, j + 1), (i + 1, j + 1), (i, j + 1)),
            ((i - 1, j), (i, j + 1), (i, j)),
        )
        for nb, s, e in sides:
            if nb not in squares:
                if s in nxt:
                    raise ValueError("boundary is not a simple cycle")
                nxt[s] = e
    start = min(nxt)
    cyc = [start]
    v = nxt[start]
    while v != start:
        cyc.append(v)
        v = nxt[v]
        if len(cyc) > len(nxt):
            raise ValueError("boundary is not a simple cycle")
    if len(cyc) != len(nxt):
        raise ValueError("boundary has several components")
    return cyc


def build_peano_config(shape: dict, a: complex, b: complex, min_scale: float = 8) -> PeanoConfig:
    """Grid approximation of a domain with two marked boundary points.

    The domain is the union ``Q`` of unit squares whose centres lie inside
    ``shape``. ``alpha`` is the counterclockwise arc of ``dQ`` from the
    vertex nearest ``a`` to the vertex nearest ``b``; ``beta`` follows the
    remaining arc through the centres of the squares just outside ``Q``.

    Parameters
    ----------
    shape : dict
        ``{"kind": "disk", "radius": R}`` or ``{"kind": "rect", "width": w, "height": h}``.
    a, b : complex
        Marked points on the continuous boundary (lattice units).
    min_scale : float
        Smallest accepted diameter (disk) or side (rectangle).
    """
    if shape["kind"] == "disk":
        scale = 2 * shape["radius"]
    else:
        scale = min(shape["width"], shape["height"])
    if scale < min_scale:
        raise ValueError(f"shape scale must be at least {min_scale} lattice units")
    if abs(complex(a) - complex(b)) < 1e-12:
        raise ValueError("a and b coincide")
    span = int(np.ceil(max(shape.get("radius", 0), shape.get("width", 0), shape.get("height", 0)))) + 2
    ii = np.arange(-span, span + 1)
    gi, gj = np.meshgrid(ii, ii, indexing="ij")
    centers = (gi + 0.5) + 1j * (gj + 0.5)
    inside = _shape_contains(shape, centers)
    squares = set(zip(gi[inside].tolist(), gj[inside].tolist()))
    cyc = _trace_cycle(squares)
    L = len(cyc)
    cz = np.array([complex(*v) for v in cyc])
    ia = int(np.argmin(np.abs(cz - a)))
    ib = int(np.argmin(np.abs(cz - b)))
    if ia == ib or (ib - ia) % L < 2 or (ia - ib) % L < 2:
        raise ValueError("marked points too close at this scale")
    alpha = [cyc[(ia + k) % L] for k in range((ib - ia) % L + 1)]
    # exterior squares along the arc ib -> ia
    seq = []
    for k in range((ia - ib) % L):
        s = cyc[(ib + k) % L]
        e = cyc[(ib + k + 1) % L]
        ux, uy = e[0] - s[0], e[1] - s[1]
        cx = (s[0] + e[0]) / 2 + uy / 2
        cy = (s[1] + e[1]) / 2 - ux / 2
        sq = (int(np.floor(cx)), int(np.floor(cy)))
        if seq and seq[-1] == sq:
            continue
        if seq:
            p = seq[-1]
            if abs(p[0] - sq[0]) == 1 and abs(p[1] - sq[1]) == 1:
                c1, c2 = (p[0], sq[1]), (sq[0], p[1])
                bridge = c1 if c1 not in squares else c2
                if bridge in squares:
                    raise ValueError("cannot bridge exterior layer")
                seq.append(bridge)
        seq.append(sq)
    if len(set(seq)) != len(seq):
        raise ValueError("exterior layer is not simple")
    alpha_v = 4 * np.array(alpha, dtype=np.int64)
    beta_v = 4 * np.array(seq, dtype=np.int64) + 2
    alpha_e = (alpha_v[1:] + alpha_v[:-1]) // 2
    beta_e = (beta_v[1:] + beta_v[:-1]) // 2
    if len(beta_v) > 1 and np.any(np.abs(beta_v[1:] - beta_v[:-1]).sum(axis=1) != 4):
        raise ValueError("exterior layer is not a lattice path")
    # reject chords of beta (non-consecutive adjacent squares)
    pos = {v: k for k, v in enumerate(seq)}
    for k, (i, j) in enumerate(seq):
        for nb in ((i + 1, j), (i, j + 1)):
            q = pos.get(nb)
            if q is not None and abs(q - k) != 1:
                raise ValueError("exterior layer has a chord")
    pa = (alpha_v[0] + beta_v[-1]) // 2
    pb = (alpha_v[-1] + beta_v[0]) // 2
    cfg = PeanoConfig(alpha_v, alpha_e, beta_v, beta_e, pa.astype(np.int64), pb.astype(np.int64),
                      meta={"kind": shape["kind"], "shape": dict(shape),
                            "a": [complex(a).real, complex(a).imag],
                            "b": [complex(b).real, complex(b).imag]})
    rep = validate_peano_config(cfg)
    if not all(rep.values()):
        raise ValueError(f"configuration invalid: {rep}")
    return cfg


def disk_peano_config(radius: float, theta_a: float = np.pi, theta_b: float = 0.0) -> PeanoConfig:
    """Disk configuration with marked points at the given angles."""
    return build_peano_config({"kind": "disk", "radius": radius},
                              radius * np.exp(1j * theta_a), radius * np.exp(1j * theta_b))


def rect_peano_config(width: int, height: int, min_scale: float = 8) -> PeanoConfig:
    """Rectangle with marked points at the midpoints of the vertical sides."""
    x0, x1, y0, y1 = _rect_bounds({"width": width, "height": height})
    ym = (y0 + y1) / 2
    return build_peano_config({"kind": "rect", "width": width, "height": height},
                              complex(x0, ym), complex(x1, ym), min_scale=min_scale)


@numba.njit(cache=True)
def _frechet(P, Q):
    n, m = len(P), len(Q)
    ca = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d = abs(P[i] - Q[j])
            if i == 0 and j == 0:
                ca[i, j] = d
            elif i == 0:
                ca[i, j] = max(ca[i, j - 1], d)
            elif j == 0:
                ca[i, j] = max(ca[i - 1, j], d)
            else:
                ca[i, j] = max(min(ca[i - 1, j], ca[i, j - 1], ca[i - 1, j - 1]), d)
    return ca[n - 1, m - 1]


def frechet_distance(P, Q) -> float:
    """Discrete Frechet distance between two complex polylines."""
    return float(_frechet(np.asarray(P, dtype=complex), np.asarray(Q, dtype=complex)))


def _densify(path: np.ndarray, step: float) -> np.ndarray:
    out = [path[:1]]
    for z0, z1 in zip(path[:-1], path[1:]):
        k = max(1, int(np.ceil(abs(z1 - z0) / step)))
        out.append(z0 + (z1 - z0) * np.arange(1, k + 1) / k)
    return np.concatenate(out)


def arc_distances(cfg: PeanoConfig) -> dict:
    """Curve distance of alpha and beta to their continuous boundary arcs (lattice units)."""
    shape = cfg.meta["shape"]
    a = complex(*cfg.meta["a"])
    b = complex(*cfg.meta["b"])
    poly = _boundary_polyline(shape)
    L = len(poly)
    ia = int(np.argmin(np.abs(poly - a)))
    ib = int(np.argmin(np.abs(poly - b)))
    arc_alpha = poly[[(ia + k) % L for k in range((ib - ia) % L + 1)]]
    arc_beta = poly[[(ib + k) % L for k in range((ia - ib) % L + 1)]]
    av = cfg.alpha_vertices / 4.0
    bv = cfg.beta_vertices / 4.0
    alpha_path = av[:, 0] + 1j * av[:, 1]
    beta_path = bv[:, 0] + 1j * bv[:, 1]
    alpha_path = _densify(alpha_path, 0.5)
    beta_path = _densify(beta_path, 0.5)
    sub = lambda z, n: z[np.linspace(0, len(z) - 1, min(len(z), n)).astype(int)]
    return {
        "alpha": frechet_distance(sub(alpha_path, 1500), sub(arc_alpha, 1500)),
        "beta": frechet_distance(sub(beta_path, 1500), sub(arc_beta, 1500)),
    }
