"""Mixed Dirichlet-Neumann problems, discrete harmonic conjugates and continuum comparison kernels."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.sparse.linalg import splu

from .lattice import GridDomain, build_disk_domain
from .walks import hitting_column

UNIT = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=np.int64)


def _as_edges(E) -> np.ndarray:
    return np.asarray(E, dtype=np.int64).reshape(-1, 4)


@dataclass(frozen=True, eq=False)
class MixedBoundaryProblem:
    """Square-lattice graph ``H`` with oriented boundary edges ``E0`` (value 0), ``E1`` (value 1), ``E2`` (reflecting).

    Edge rows are ``[vx, vy, ux, uy]`` with ``v`` in ``H`` and ``u`` outside.
    Boundary edges listed in none of the three sets are treated as reflecting.
    """

    vertices: np.ndarray
    E0: np.ndarray
    E1: np.ndarray
    E2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=np.int64).reshape(-1, 2))
        for k in ("E0", "E1", "E2"):
            object.__setattr__(self, k, _as_edges(getattr(self, k)))
        rep = validate_problem(self)
        bad = [k for k, ok in rep.items() if not ok]
        if bad:
            raise ValueError(f"invalid mixed problem: {bad}")

    @property
    def index(self) -> dict:
        return {v: i for i, v in enumerate(map(tuple, self.vertices.tolist()))}

    def to_json(self) -> str:
        return json.dumps({"interior": self.vertices.tolist(), "E0": self.E0.tolist(),
                           "E1": self.E1.tolist(), "E2": self.E2.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "MixedBoundaryProblem":
        d = json.loads(text)
        return cls(d["interior"], d["E0"], d["E1"], d["E2"])


def validate_problem(p: MixedBoundaryProblem) -> dict:
    idx = {v: i for i, v in enumerate(map(tuple, p.vertices.tolist()))}
    rep = {"nonempty": len(idx) > 0 and len(idx) == len(p.vertices)}
    sets = [set(map(tuple, E.tolist())) for E in (p.E0, p.E1, p.E2)]
    allE = np.concatenate([p.E0, p.E1, p.E2])
    rep["dirichlet_nonempty"] = len(p.E0) + len(p.E1) > 0
    rep["disjoint"] = sum(len(s) for s in sets) == len(set().union(*sets)) and \
        sum(len(s) for s in sets) == len(allE)
    rep["edges_oriented_out"] = all(
        (e[0], e[1]) in idx and (e[2], e[3]) not in idx and abs(e[2] - e[0]) + abs(e[3] - e[1]) == 1
        for e in allE.tolist())
    if len(idx):
        V = p.vertices
        rows, cols = [], []
        for d in UNIT[:2]:
            for i, w in enumerate(map(tuple, (V + d).tolist())):
                j = idx.get(w)
                if j is not None:
                    rows.append(i)
                    cols.append(j)
        g = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(V), len(V)))
        rep["connected"] = connected_components(g, directed=False)[0] == 1
    else:
        rep["connected"] = False
    return rep


@dataclass
class HarmonicTable:
    """``h_hat`` on the vertices of ``H``."""

    problem: MixedBoundaryProblem
    values: np.ndarray

    def __call__(self, v) -> float:
        return float(self.values[self.problem.index[tuple(int(c) for c in v)]])


def solve_mixed(problem: MixedBoundaryProblem) -> HarmonicTable:
    """Probability that the walk on ``H + E0 + E1`` uses an ``E1`` edge before an ``E0`` edge.

    Solves ``deg(v) h(v) = sum_{w ~ v in H} h(w) + #E1(v)`` with a sparse LU factorization.
    """
    V = problem.vertices
    idx = problem.index
    n = len(V)
    rows, cols = [], []
    for d in UNIT:
        for i, w in enumerate(map(tuple, (V + d).tolist())):
            j = idx.get(w)
            if j is not None:
                rows.append(i)
                cols.append(j)
    deg = np.bincount(rows, minlength=n).astype(float)
    b = np.zeros(n)
    for E, val in ((problem.E0, 0.0), (problem.E1, 1.0)):
        if len(E):
            k = np.array([idx[(e[0], e[1])] for e in E.tolist()])
            np.add.at(deg, k, 1.0)
            np.add.at(b, k, val)
    A = sp.csc_matrix((-np.ones(len(rows)), (rows, cols)), shape=(n, n)) + sp.diags(deg)
    h = splu(A.tocsc()).solve(b)
    return HarmonicTable(problem, np.clip(h, 0.0, 1.0))


def mixed_residual(table: HarmonicTable) -> float:
    """Max |deg h - sum h(neighbours) - #E1| over ``H``."""
    p = table.problem
    V, idx, h = p.vertices, p.index, table.values
    r = np.zeros(len(V))
    for d in UNIT:
        for i, w in enumerate(map(tuple, (V + d).tolist())):
            j = idx.get(w)
            if j is not None:
                r[i] += h[j] - h[i]
    for E, val in ((p.E0, 0.0), (p.E1, 1.0)):
        for e in E.tolist():
            i = idx[(e[0], e[1])]
            r[i] += val - h[i]
    return float(np.abs(r).max())


# ---------------------------------------------------------------------------
# harmonic conjugate


@dataclass
class ConjugatePair:
    """``h_hat`` on ``H`` (plus ``v0``, ``v1``) and ``k_hat`` on the faces of ``H-hat``.

    Faces are labelled by lattice face centres ``(2i + 1, 2j + 1)`` (doubled
    coordinates); ``face_id`` maps each centre to its merged face, and
    ``k_hat[face_id]`` is the conjugate value.
    """

    h: HarmonicTable
    face_centres: np.ndarray
    face_id: np.ndarray
    k_hat: np.ndarray
    v0_face: int
    v1_face: int
    L: float
    residual: float

    def k_at(self, centre) -> float:
        c = tuple(int(x) for x in centre)
        for k, f in enumerate(map(tuple, self.face_centres.tolist())):
            if f == c:
                return float(self.k_hat[self.face_id[k]])
        raise KeyError(centre)


def _faces_of_edge(v, u):
    """Doubled centres of the (right, left) faces of the oriented lattice edge ``v -> u``."""
    vx, vy = 2 * v[0], 2 * v[1]
    dx, dy = u[0] - v[0], u[1] - v[1]
    mx, my = vx + dx, vy + dy
    right = (mx + dy, my - dx)
    left = (mx - dy, my + dx)
    return right, left


def harmonic_conjugate(table: HarmonicTable, tol: float = 1e-9) -> ConjugatePair:
    """Integrate the Cauchy-Riemann relation ``k(left) - k(right) = h(head) - h(tail)``.

    ``E0`` and ``E1`` edges end at the identified vertices ``v0`` (value 0)
    and ``v1`` (value 1); faces are merged across edges that are not in
    ``H-hat``. ``k_hat`` is shifted to vanish on ``v0_face`` (its minimum);
    ``L`` is its maximum.

    Raises
    ------
    RuntimeError
        If the cycle residual exceeds ``tol``.
    """
    p = table.problem
    V, idx, h = p.vertices, p.index, table.values
    # faces touching H
    corners = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]])
    fc = np.unique((2 * V[:, None, :] + corners[None]).reshape(-1, 2), axis=0)
    fidx = {f: k for k, f in enumerate(map(tuple, fc.tolist()))}
    nf = len(fc)
    hat_edges = []  # (right face, left face, increment)
    merge = []
    for i, v in enumerate(map(tuple, V.tolist())):
        for d in UNIT[:2]:
            u = (v[0] + d[0], v[1] + d[1])
            j = idx.get(u)
            if j is not None:
                r, l = _faces_of_edge(v, u)
                hat_edges.append((fidx[r], fidx[l], h[j] - h[i]))
    for E, val in ((p.E0, 0.0), (p.E1, 1.0)):
        for e in E.tolist():
            v, u = (e[0], e[1]), (e[2], e[3])
            r, l = _faces_of_edge(v, u)
            hat_edges.append((fidx[r], fidx[l], val - h[idx[v]]))
    in_hat = {(e[0], e[1], e[2], e[3]) for E in (p.E0, p.E1) for e in E.tolist()}
    # merge faces across lattice edges not in H-hat
    for k, f in enumerate(map(tuple, fc.tolist())):
        for d in ((2, 0), (0, 2)):
            g = (f[0] + d[0], f[1] + d[1])
            j = fidx.get(g)
            if j is None:
                continue
            # shared lattice edge between faces f and g
            if d[0]:
                a = ((f[0] + 1) // 2, (f[1] - 1) // 2)
                b = ((f[0] + 1) // 2, (f[1] + 1) // 2)
            else:
                a = ((f[0] - 1) // 2, (f[1] + 1) // 2)
                b = ((f[0] + 1) // 2, (f[1] + 1) // 2)
            ia, ib = a in idx, b in idx
            if ia and ib:
                continue
            if ia or ib:
                inner, outer = (a, b) if ia else (b, a)
                if (inner[0], inner[1], outer[0], outer[1]) in in_hat:
                    continue
            merge.append((k, j))
    if merge:
        m = np.array(merge)
        g = sp.coo_matrix((np.ones(len(m)), (m[:, 0], m[:, 1])), shape=(nf, nf))
        nface, fid = connected_components(g, directed=False)
    else:
        nface, fid = nf, np.arange(nf)
    he = np.array(hat_edges)
    R = fid[he[:, 0].astype(int)]
    Lf = fid[he[:, 1].astype(int)]
    inc = he[:, 2]
    # integrate along a BFS tree of the face graph
    G = sp.coo_matrix((np.ones(len(R)), (R, Lf)), shape=(nface, nface)).tocsr()
    G = G + G.T
    ncomp, comp = connected_components(G, directed=False)
    if ncomp != 1:
        raise RuntimeError("dual graph of H-hat is disconnected")
    order, pred = breadth_first_order(G, 0, directed=False, return_predecessors=True)
    k = np.full(nface, np.nan)
    k[0] = 0.0
    lookup = {}
    for r, l, c in zip(R.tolist(), Lf.tolist(), inc.tolist()):
        lookup.setdefault((r, l), c)
        lookup.setdefault((l, r), -c)
    for f in order[1:]:
        q = pred[f]
        k[f] = k[q] + lookup[(q, f)]
    res = float(np.abs(k[Lf] - k[R] - inc).max()) if len(inc) else 0.0
    if not res < tol:
        raise RuntimeError(f"Cauchy-Riemann residual {res:.3e} exceeds {tol}")
    k = k - k.min()
    return ConjugatePair(table, fc, fid, k, int(np.argmin(k)), int(np.argmax(k)), float(k.max()), res)


# ---------------------------------------------------------------------------
# builders


def boundary_edges(vertices) -> np.ndarray:
    """Oriented lattice edges from ``vertices`` to the complement."""
    V = np.asarray(vertices, dtype=np.int64).reshape(-1, 2)
    S = set(map(tuple, V.tolist()))
    out = [(v[0], v[1], v[0] + d[0], v[1] + d[1]) for v in V.tolist() for d in UNIT.tolist()
           if (v[0] + d[0], v[1] + d[1]) not in S]
    return np.array(out, dtype=np.int64).reshape(-1, 4)


def rectangle_problem(width: int, height: int) -> MixedBoundaryProblem:
    """``width x height`` block: ``E0`` on the left, ``E1`` on the right, reflecting top and bottom."""
    xs, ys = np.meshgrid(np.arange(width), np.arange(height), indexing="ij")
    V = np.stack([xs.ravel(), ys.ravel()], axis=1)
    E = boundary_edges(V)
    dx = E[:, 2] - E[:, 0]
    return MixedBoundaryProblem(V, E[dx == -1], E[dx == 1], E[dx == 0])


def _edge_angles(E: np.ndarray) -> np.ndarray:
    mid = (E[:, :2] + E[:, 2:]) / 2.0
    return np.mod(np.arctan2(mid[:, 1], mid[:, 0]), 2 * np.pi)


def three_arc_points(theta0: float, theta1: float, theta_inf: float):
    return np.exp(1j * theta0), np.exp(1j * theta1), np.exp(1j * theta_inf)


def disk_to_halfplane(q0: complex, q1: complex, qinf: complex):
    """Moebius map of the unit disk onto the upper half-plane with ``q0, q1, qinf -> 0, 1, inf``.

    The points must be in counterclockwise order.
    """
    def M(z):
        z = np.asarray(z, dtype=complex)
        return (z - q0) * (q1 - qinf) / ((z - qinf) * (q1 - q0))
    if M(0j).imag <= 0:
        raise ValueError("points must be in counterclockwise order")
    return M


def disk_three_arc_problem(R: float, theta0: float = 0.0, theta1: float = 2 * np.pi / 3,
                           theta_inf: float = 4 * np.pi / 3):
    """Disk of radius ``R`` with arcs ``[theta0, theta1)`` -> ``E0``, ``[theta1, theta_inf)`` -> ``E1``, rest ``E2``.

    Boundary edges are assigned by the angle of their midpoint. Returns the
    problem and the continuum value ``h(M(0))``.
    """
    D = build_disk_domain(R)
    E = boundary_edges(D.interior)
    ang = _edge_angles(E)
    rel = lambda t: np.mod(t - theta0, 2 * np.pi)
    a1, ainf = rel(theta1), rel(theta_inf)
    r = rel(ang)
    E0 = E[r < a1]
    E1 = E[(r >= a1) & (r < ainf)]
    E2 = E[r >= ainf]
    M = disk_to_halfplane(*three_arc_points(theta0, theta1, theta_inf))
    return MixedBoundaryProblem(D.interior, E0, E1, E2), continuum_mixed(complex(M(0j)))


# ---------------------------------------------------------------------------
# continuum kernels


def lambda_kernel(psi_w, psi_u, tol: float = 1e-9) -> float:
    """Poisson-kernel ratio ``(1 - |w|^2) / |w - u|^2`` for ``|w| < 1``, ``|u| = 1``."""
    w = complex(psi_w)
    u = complex(psi_u)
    if not abs(w) < 1:
        raise ValueError("psi_w must lie in the open unit disk")
    if abs(abs(u) - 1) > tol:
        raise ValueError("psi_u must lie on the unit circle")
    a = (1 - abs(w) ** 2) / abs(w - u) ** 2
    b = ((u + w) / (u - w)).real
    if abs(a - b) > 1e-12 * max(1.0, abs(a)):
        raise ArithmeticError("kernel forms disagree")
    return float(a)


def arccot(x):
    """Inverse cotangent with values in ``(0, pi)``."""
    return np.pi / 2 - np.arctan(x)


def continuum_mixed(z) -> float:
    """Harmonic ``h`` on the upper half-plane: 0 on (0, 1), 1 on (1, inf), reflecting on (-inf, 0)."""
    z = complex(z)
    if z.imag < 0:
        raise ValueError("z must lie in the closed upper half-plane")
    if abs(z) < 1e-14 or abs(z - 1) < 1e-14:
        raise ValueError("h is singular at 0 and 1")
    r = abs(z)
    theta = np.angle(z)
    s = np.sin(theta / 2)
    if s == 0.0:
        return 0.0 if r < 1 else 1.0
    return float(arccot((1 - r) / (2 * np.sqrt(r) * s)) / np.pi)


def lambda_mean(psi_w: complex, n: int = 4096) -> float:
    """Average of ``lambda_kernel(psi_w, e^{i phi})`` over the circle (trapezoid rule)."""
    phi = 2 * np.pi * np.arange(n) / n
    u = np.exp(1j * phi)
    w = complex(psi_w)
    return float(np.mean((1 - abs(w) ** 2) / np.abs(w - u) ** 2))


# ---------------------------------------------------------------------------
# discrete vs continuum hitting


def projected_angle(pair) -> float:
    """Angle of the boundary pair's edge midpoint."""
    p = np.asarray(pair, dtype=float)
    m = (p[:2] + p[2:]) / 2
    return float(np.arctan2(m[1], m[0]))


def hitting_vs_lambda(D: GridDomain, w, u, R: float | None = None, spec=None) -> dict:
    """``|H(w, u) / H(0, u) - lambda(w / R, u_hat)|`` with ``u_hat`` the projected midpoint of ``u``."""
    R = float(R if R is not None else D.meta.get("radius", D.inradius_origin))
    k = u if np.ndim(u) == 0 else D.pair_index[tuple(int(c) for c in u)]
    col = hitting_column(D, int(k), spec)
    h0 = col[D.index_of((0, 0))]
    if not h0 > 0:
        raise ValueError("H(0, u) = 0")
    iw = D.index_of(w)
    if iw < 0:
        raise ValueError("w is not interior")
    ratio = col[iw] / h0
    psi_w = complex(w[0], w[1]) / R
    lam = lambda_kernel(psi_w, np.exp(1j * projected_angle(D.boundary_pairs[int(k)])))
    return {"ratio": float(ratio), "lambda": lam, "deviation": float(abs(ratio - lam))}


def lambda_test_set(R: float, D: GridDomain | None = None) -> list:
    """Twenty ``(w, pair index)`` cases at fixed relative positions, ``|w| <= R / 2``."""
    D = D if D is not None else build_disk_domain(R)
    ang = np.array([projected_angle(p) for p in D.boundary_pairs])
    cases = []
    for k in range(20):
        rho = 0.1 * (1 + k % 5)
        phi = 2 * np.pi * (k // 5) / 8
        w = (int(round(R * rho * np.cos(phi))), int(round(R * rho * np.sin(phi))))
        target = np.pi / 4 * (k // 5) + (0.0 if k % 2 == 0 else np.pi / 3)
        d = np.abs(np.angle(np.exp(1j * (ang - target))))
        cases.append((w, int(np.argmin(d))))
    return cases


def hitting_vs_lambda_max(R: float, spec=None) -> float:
    """Worst deviation over :func:`lambda_test_set` on the disk of radius ``R``."""
    D = build_disk_domain(R)
    return max(hitting_vs_lambda(D, w, k, R, spec)["deviation"] for w, k in lambda_test_set(R, D))


__all__ = [
    "MixedBoundaryProblem", "HarmonicTable", "ConjugatePair", "solve_mixed", "mixed_residual",
    "harmonic_conjugate", "rectangle_problem", "disk_three_arc_problem", "disk_to_halfplane",
    "lambda_kernel", "continuum_mixed", "lambda_mean", "hitting_vs_lambda", "lambda_test_set",
    "hitting_vs_lambda_max", "boundary_edges",
]
