"""Planar lattices, step distributions and grid domains.

Vertices of a grid domain are integer coordinate pairs in the lattice basis.
A lattice is either ``"square"`` (basis ``1, i``) or ``"triangular"``
(basis ``1, exp(2 pi i / 3)``).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

OMEGA = np.exp(2j * np.pi / 3)

# undirected nearest-neighbour edges and faces, per lattice
_LATTICE_EDGES = {
    "square": ((1, 0), (0, 1), (-1, 0), (0, -1)),
    "triangular": ((1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, -1)),
}
_LATTICE_FACES = {
    "square": (((0, 0), (1, 0), (1, 1), (0, 1)),),
    "triangular": (((0, 0), (1, 0), (1, 1)), ((0, 0), (1, 1), (0, 1))),
}
_LATTICE_BASIS = {"square": (1.0 + 0j, 1j), "triangular": (1.0 + 0j, complex(OMEGA))}


@dataclass(frozen=True, eq=False)
class LatticeWalkSpec:
    """Law of one step of a lattice walk.

    Parameters
    ----------
    neighbor_offsets : tuple of (int, int)
        Support of the step, in lattice coordinates. May contain ``(0, 0)``.
    step_probs : tuple of float
        Probability of each offset.
    covariance_is_identity : bool
        When set, the step must have zero mean and identity covariance in the
        plane (after applying ``scale``).
    lattice : str
        ``"square"`` or ``"triangular"``.
    scale : float
        Multiplies the lattice basis when embedding into the plane.
    """

    neighbor_offsets: tuple
    step_probs: tuple
    covariance_is_identity: bool = False
    lattice: str = "square"
    scale: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "neighbor_offsets", tuple(tuple(int(c) for c in o) for o in self.neighbor_offsets))
        object.__setattr__(self, "step_probs", tuple(float(p) for p in self.step_probs))
        if self.lattice not in _LATTICE_EDGES:
            raise ValueError(f"unknown lattice {self.lattice!r}")
        if len(self.neighbor_offsets) != len(self.step_probs):
            raise ValueError("offsets and probabilities differ in length")
        report = spec_report(self)
        bad = [k for k, ok in report.items() if not ok]
        if bad:
            raise ValueError(f"invalid walk spec: {', '.join(bad)}")

    @property
    def offsets(self) -> np.ndarray:
        return np.array(self.neighbor_offsets, dtype=np.int64).reshape(-1, 2)

    @property
    def probs(self) -> np.ndarray:
        return np.array(self.step_probs, dtype=float)

    @property
    def basis(self) -> tuple:
        e1, e2 = _LATTICE_BASIS[self.lattice]
        return e1 * self.scale, e2 * self.scale

    def embed(self, v) -> np.ndarray:
        """Complex plane position of lattice point(s) ``v``."""
        v = np.asarray(v, dtype=float)
        e1, e2 = self.basis
        return v[..., 0] * e1 + v[..., 1] * e2

    def mean(self) -> complex:
        return complex(np.sum(self.probs * self.embed(self.offsets)))

    def covariance(self) -> np.ndarray:
        z = self.embed(self.offsets)
        xy = np.stack([z.real, z.imag])
        return (xy * self.probs) @ xy.T

    def is_symmetric(self) -> bool:
        """True when the law of X equals the law of -X."""
        law = dict(zip(self.neighbor_offsets, self.step_probs))
        return all(abs(law.get((-o[0], -o[1]), 0.0) - p) < 1e-15 for o, p in law.items())

    def reversed(self) -> "LatticeWalkSpec":
        """Walk with step -X."""
        offs = tuple((-o[0], -o[1]) for o in self.neighbor_offsets)
        return LatticeWalkSpec(offs, self.step_probs, self.covariance_is_identity,
                               self.lattice, self.scale, self.name + "-reversed")

    def digest(self) -> str:
        payload = json.dumps([self.lattice, self.scale, self.neighbor_offsets,
                              [repr(p) for p in self.step_probs]])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def spec_report(spec: LatticeWalkSpec) -> dict:
    """Check the invariants of a walk spec; returns ``{check: bool}``."""
    p = np.array(spec.step_probs, dtype=float)
    rep = {
        "probabilities_nonnegative": bool(np.all(p >= 0)),
        "probabilities_sum_to_one": bool(abs(p.sum() - 1.0) < 1e-12),
        "steps_are_lattice_edges": all(
            o == (0, 0) or o in _LATTICE_EDGES[spec.lattice] for o in spec.neighbor_offsets),
    }
    if spec.covariance_is_identity:
        e1, e2 = _LATTICE_BASIS[spec.lattice]
        o = np.array(spec.neighbor_offsets, dtype=float).reshape(-1, 2)
        z = (o[:, 0] * e1 + o[:, 1] * e2) * spec.scale
        m = np.sum(p * z)
        xy = np.stack([z.real, z.imag])
        cov = (xy * p) @ xy.T
        rep["mean_zero"] = bool(abs(m) < 1e-12)
        rep["covariance_identity"] = bool(np.max(np.abs(cov - np.eye(2))) < 1e-9)
    return rep


def square_walk() -> LatticeWalkSpec:
    """Simple random walk on the square lattice."""
    return LatticeWalkSpec(((1, 0), (0, 1), (-1, 0), (0, -1)), (0.25,) * 4,
                           name="square")


def lazy_square_walk(p0: float) -> LatticeWalkSpec:
    """Simple random walk that holds with probability ``p0``."""
    q = (1.0 - p0) / 4
    return LatticeWalkSpec(((0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)), (p0, q, q, q, q),
                           name=f"lazy-square-{p0}")


def triangular_walk() -> LatticeWalkSpec:
    """Drift-free non-reversible walk with steps 1, w, w^2 (w a cube root of unity)."""
    return LatticeWalkSpec(((1, 0), (0, 1), (-1, -1)), (1 / 3,) * 3,
                           lattice="triangular", name="triangular-3")


def with_identity_covariance(spec: LatticeWalkSpec) -> LatticeWalkSpec:
    """Rescale the embedding so that a centred isotropic step has identity covariance."""
    cov = spec.covariance()
    s = 1.0 / np.sqrt(cov[0, 0])
    return LatticeWalkSpec(spec.neighbor_offsets, spec.step_probs, True, spec.lattice,
                           spec.scale * s, spec.name + "-normalized")


# ---------------------------------------------------------------------------
# grid domains


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Finite set of lattice vertices together with its exit edges.

    Attributes
    ----------
    interior : ndarray, shape (n, 2)
        Interior vertices, sorted lexicographically.
    boundary_pairs : ndarray, shape (m, 4)
        Rows ``(vx, vy, ux, uy)``: ``v`` is interior, ``u`` is the outer
        endpoint of the exit edge.
    inradius_origin : float
        Euclidean distance from the origin to the nearest excluded vertex.
    """

    interior: np.ndarray
    boundary_pairs: np.ndarray
    inradius_origin: float
    lattice: str = "square"
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.interior)

    @cached_property
    def _grid(self):
        pts = np.concatenate([self.interior, self.boundary_pairs[:, 2:]]) if len(self.boundary_pairs) else self.interior
        lo = pts.min(axis=0) - 2
        hi = pts.max(axis=0) + 2
        idx = -np.ones(tuple(hi - lo + 1), dtype=np.int64)
        idx[self.interior[:, 0] - lo[0], self.interior[:, 1] - lo[1]] = np.arange(self.n)
        return lo, idx

    @property
    def origin(self) -> np.ndarray:
        """Lower corner of :attr:`index_grid` in lattice coordinates."""
        return self._grid[0]

    @property
    def index_grid(self) -> np.ndarray:
        """Array mapping ``v - origin`` to interior index, ``-1`` outside."""
        return self._grid[1]

    def index_of(self, v) -> int:
        v = np.asarray(v, dtype=np.int64)
        lo, idx = self._grid
        k = v - lo
        if np.any(k < 0) or np.any(k >= idx.shape):
            return -1
        return int(idx[k[0], k[1]])

    def indices_of(self, vs) -> np.ndarray:
        vs = np.asarray(vs, dtype=np.int64).reshape(-1, 2)
        lo, idx = self._grid
        k = vs - lo
        ok = np.all((k >= 0) & (k < np.array(idx.shape)), axis=1)
        out = -np.ones(len(vs), dtype=np.int64)
        out[ok] = idx[k[ok, 0], k[ok, 1]]
        return out

    def contains(self, v) -> bool:
        return self.index_of(v) >= 0

    def embed(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        e1, e2 = _LATTICE_BASIS[self.lattice]
        return (v[..., 0] * e1 + v[..., 1] * e2) * self.scale

    @cached_property
    def pair_index(self) -> dict:
        return {tuple(int(c) for c in r): i for i, r in enumerate(self.boundary_pairs)}

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.lattice.encode())
        h.update(np.ascontiguousarray(self.interior, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.boundary_pairs, dtype=np.int64).tobytes())
        return h.hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps({
            "lattice": self.lattice,
            "interior": self.interior.tolist(),
            "boundary_pairs": self.boundary_pairs.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "GridDomain":
        d = json.loads(text)
        return domain_from_vertices(np.array(d["interior"], dtype=np.int64), d.get("lattice", "square"))


def _sorted_unique(vs: np.ndarray) -> np.ndarray:
    vs = np.asarray(vs, dtype=np.int64).reshape(-1, 2)
    if len(vs) == 0:
        return vs
    return np.unique(vs, axis=0)


def exit_pairs(interior: np.ndarray, lattice: str = "square") -> np.ndarray:
    """All (inner, outer) edges leaving ``interior`` along lattice edges."""
    interior = _sorted_unique(interior)
    if len(interior) == 0:
        return np.zeros((0, 4), dtype=np.int64)
    lo = interior.min(axis=0) - 2
    shape = tuple(interior.max(axis=0) - lo + 3)
    inside = np.zeros(shape, dtype=bool)
    inside[interior[:, 0] - lo[0], interior[:, 1] - lo[1]] = True
    blocks = []
    for dx, dy in _LATTICE_EDGES[lattice]:
        u = interior + np.array([dx, dy])
        out = ~inside[u[:, 0] - lo[0], u[:, 1] - lo[1]]
        blocks.append(np.concatenate([interior[out], u[out]], axis=1))
    rows = np.concatenate(blocks)
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def domain_from_vertices(interior, lattice: str = "square", scale: float = 1.0) -> GridDomain:
    """Wrap an explicit vertex set as a :class:`GridDomain` (no validation)."""
    interior = _sorted_unique(interior)
    pairs = exit_pairs(interior, lattice)
    e1, e2 = _LATTICE_BASIS[lattice]
    if len(pairs):
        z = (pairs[:, 2] * e1 + pairs[:, 3] * e2) * scale
        inr = float(np.min(np.abs(z)))
    else:
        inr = float("inf")
    return GridDomain(interior, pairs, inr, lattice, scale)


def _component_of(vs: np.ndarray, lattice: str, root) -> np.ndarray:
    """Edge-connected component of ``root`` inside the vertex set ``vs``."""
    lo = vs.min(axis=0) - 1
    shape = tuple(vs.max(axis=0) - lo + 2)
    idx = -np.ones(shape, dtype=np.int64)
    idx[vs[:, 0] - lo[0], vs[:, 1] - lo[1]] = np.arange(len(vs))
    rows, cols = [], []
    for dx, dy in _LATTICE_EDGES[lattice]:
        t = vs + np.array([dx, dy])
        k = t - lo
        ok = np.all((k >= 0) & (k < np.array(shape)), axis=1)
        j = -np.ones(len(vs), dtype=np.int64)
        j[ok] = idx[k[ok, 0], k[ok, 1]]
        m = j >= 0
        rows.append(np.nonzero(m)[0])
        cols.append(j[m])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(vs), len(vs)))
    _, lab = connected_components(g, directed=False)
    r = idx[root[0] - lo[0], root[1] - lo[1]]
    return vs[lab == lab[r]]


def build_disk_domain(radius: float, spec: LatticeWalkSpec | None = None,
                      center: complex = 0j) -> GridDomain:
    """Component of the origin among lattice vertices at distance < ``radius`` from ``center``.

    Parameters
    ----------
    radius : float
        Disk radius in plane units.
    spec : LatticeWalkSpec, optional
        Supplies the lattice and embedding scale (square walk by default).
    center : complex
        Centre of the disk; the origin must lie strictly inside.

    Returns
    -------
    GridDomain
    """
    spec = spec or square_walk()
    if not radius > 0 or abs(center) >= radius:
        raise ValueError("disk does not contain the origin")
    e1, e2 = spec.basis
    # bounding box in lattice coordinates
    m = np.array([[e1.real, e2.real], [e1.imag, e2.imag]])
    minv = np.linalg.inv(m)
    span = int(np.ceil((radius + abs(center)) * np.abs(minv).sum(axis=1).max())) + 2
    xs = np.arange(-span, span + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    z = (gx * e1 + gy * e2)
    inside = np.abs(z - center) < radius
    vs = np.stack([gx[inside], gy[inside]], axis=1).astype(np.int64)
    comp = _component_of(vs, spec.lattice, (0, 0))
    dom = domain_from_vertices(comp, spec.lattice, spec.scale)
    dom.meta.update({"kind": "disk", "radius": float(radius), "center": [center.real, center.imag]})
    return dom


def build_box_domain(half_width: int, lattice: str = "square") -> GridDomain:
    """Vertices with both coordinates in ``[-half_width, half_width]``."""
    xs = np.arange(-half_width, half_width + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    dom = domain_from_vertices(np.stack([gx.ravel(), gy.ravel()], axis=1), lattice)
    dom.meta.update({"kind": "box", "half_width": int(half_width)})
    return dom


def _coface_offsets(lattice: str):
    offs = set()
    for face in _LATTICE_FACES[lattice]:
        for c in face:
            for d in face:
                o = (d[0] - c[0], d[1] - c[1])
                if o != (0, 0):
                    offs.add(o)
    return sorted(offs)


def is_simply_connected(interior: np.ndarray, lattice: str = "square") -> bool:
    """True when the complement of the closed domain is connected.

    The closed domain is the union of interior vertices, the edges joining
    them and the faces all of whose corners are interior. Its complement is
    connected exactly when excluded vertices (in a padded box) are connected
    through shared free faces.
    """
    interior = _sorted_unique(interior)
    if len(interior) == 0:
        return True
    lo = interior.min(axis=0) - 2
    hi = interior.max(axis=0) + 2
    shape = tuple(hi - lo + 1)
    inside = np.zeros(shape, dtype=bool)
    inside[interior[:, 0] - lo[0], interior[:, 1] - lo[1]] = True
    out = np.argwhere(~inside)
    idx = -np.ones(shape, dtype=np.int64)
    idx[out[:, 0], out[:, 1]] = np.arange(len(out))
    rows, cols = [], []
    for dx, dy in _coface_offsets(lattice):
        t = out + np.array([dx, dy])
        ok = np.all((t >= 0) & (t < np.array(shape)), axis=1)
        j = -np.ones(len(out), dtype=np.int64)
        j[ok] = idx[t[ok, 0], t[ok, 1]]
        m = j >= 0
        rows.append(np.nonzero(m)[0])
        cols.append(j[m])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(out), len(out)))
    ncomp, _ = connected_components(g, directed=False)
    return ncomp == 1


def validate_domain(D: GridDomain) -> dict:
    """Check every :class:`GridDomain` invariant; returns ``{check: bool}``."""
    rep = {}
    interior = D.interior
    rep["origin_in_interior"] = D.contains((0, 0))
    if D.n:
        comp = _component_of(interior, D.lattice, interior[0])
        rep["edge_connected"] = len(comp) == D.n
    else:
        rep["edge_connected"] = False
    expected = exit_pairs(interior, D.lattice)
    got = D.boundary_pairs
    ok = got.shape == expected.shape
    if ok and len(got):
        inner_in = D.indices_of(got[:, :2]) >= 0
        outer_out = D.indices_of(got[:, 2:]) < 0
        a = {tuple(r) for r in got.tolist()}
        b = {tuple(r) for r in expected.tolist()}
        ok = bool(inner_in.all() and outer_out.all() and a == b)
    rep["boundary_pairs_exact"] = bool(ok)
    if len(got):
        inr = float(np.min(np.abs(D.embed(got[:, 2:]))))
    else:
        inr = float("inf")
    rep["inradius_finite_positive"] = bool(0 < D.inradius_origin < np.inf and abs(inr - D.inradius_origin) < 1e-12)
    rep["simply_connected"] = is_simply_connected(interior, D.lattice)
    return rep


def annulus_domain(outer: int, inner: int) -> GridDomain:
    """Square annulus ``inner <= max(|x|, |y|) <= outer`` (not simply connected)."""
    xs = np.arange(-outer, outer + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    keep = np.maximum(np.abs(gx), np.abs(gy)) >= inner
    return domain_from_vertices(np.stack([gx[keep], gy[keep]], axis=1))
