"""Random-walk sampling and the exact linear-solve oracles.

Every walk lives on a :class:`~slelab.lattice.GridDomain` and is stopped at
its first step along an exit edge. Exact quantities come from the absorbing
chain ``A = I - P`` restricted to the interior:

* ``G = A^{-1}`` is the Green's function (expected visits),
* exit probabilities are ``G`` times the one-step exit weights.
"""
from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .lattice import GridDomain, LatticeWalkSpec, build_box_domain, square_walk

DIRECT_LIMIT = 200_000
STEP_CAP = 10**9


@dataclass
class WalkPath:
    """Walk trajectory; ``exit_pair`` is ``(vx, vy, ux, uy)`` or ``None``."""

    vertices: np.ndarray
    exit_pair: np.ndarray | None = None

    def __len__(self):
        return len(self.vertices)

    @property
    def full(self) -> np.ndarray:
        """Vertices including the outer endpoint of the exit edge."""
        if self.exit_pair is None:
            return self.vertices
        return np.concatenate([self.vertices, self.exit_pair[None, 2:]])


# ---------------------------------------------------------------------------
# sparse operator


class LinearSystem:
    """Solves ``A x = b`` and ``A^T x = b`` for a fixed sparse matrix.

    A sparse LU factorization is used up to :data:`DIRECT_LIMIT` unknowns;
    beyond that, Krylov iterations preconditioned by algebraic multigrid.
    """

    def __init__(self, A: sp.spmatrix, symmetric: bool = False, tol: float = 1e-12):
        self.A = A.tocsc()
        self.n = A.shape[0]
        self.symmetric = symmetric
        self.tol = tol
        self._lu = None
        self._ml = {}
        if self.n <= DIRECT_LIMIT:
            self._lu = sla.splu(self.A)

    def _iterative(self, b, trans):
        import pyamg

        M = self.A.T.tocsr() if trans else self.A.tocsr()
        if trans not in self._ml:
            self._ml[trans] = pyamg.smoothed_aggregation_solver(M, symmetry="symmetric" if self.symmetric else "nonsymmetric")
        ml = self._ml[trans]
        accel = "cg" if self.symmetric else "gmres"
        x = ml.solve(b, tol=self.tol, accel=accel, maxiter=500)
        return x

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return self._lu.solve(np.asarray(b, dtype=float))
        if b.ndim == 2:
            return np.stack([self._iterative(b[:, k], False) for k in range(b.shape[1])], axis=1)
        return self._iterative(b, False)

    def solve_T(self, b: np.ndarray) -> np.ndarray:
        if self.symmetric:
            return self.solve(b)
        if self._lu is not None:
            return self._lu.solve(np.asarray(b, dtype=float), trans="T")
        if b.ndim == 2:
            return np.stack([self._iterative(b[:, k], True) for k in range(b.shape[1])], axis=1)
        return self._iterative(b, True)


def _pair_keys(rows: np.ndarray) -> np.ndarray:
    r = np.asarray(rows, dtype=np.int64).reshape(-1, 4) + (1 << 14)
    return ((r[:, 0] << 45) | (r[:, 1] << 30) | (r[:, 2] << 15) | r[:, 3])


@dataclass
class WalkOperator:
    """Transition structure of a walk killed on leaving ``D``.

    Attributes
    ----------
    P : csr_matrix
        Interior-to-interior transition matrix.
    E : csr_matrix
        Interior-to-boundary-pair one-step probabilities.
    system : LinearSystem
        Solver for ``I - P``.
    """

    domain: GridDomain
    spec: LatticeWalkSpec
    P: sp.csr_matrix
    E: sp.csr_matrix
    system: LinearSystem


def _assemble(D: GridDomain, spec: LatticeWalkSpec):
    n = D.n
    offs = spec.offsets
    probs = spec.probs
    pair_keys = _pair_keys(D.boundary_pairs)
    order = np.argsort(pair_keys)
    sorted_keys = pair_keys[order]
    pr, pc, pv, er, ec, ev = [], [], [], [], [], []
    rows = np.arange(n)
    for o, p in zip(offs, probs):
        if p == 0:
            continue
        tgt = D.interior + o
        j = D.indices_of(tgt)
        inside = j >= 0
        pr.append(rows[inside])
        pc.append(j[inside])
        pv.append(np.full(inside.sum(), p))
        out = ~inside
        if out.any():
            keys = _pair_keys(np.concatenate([D.interior[out], tgt[out]], axis=1))
            pos = np.searchsorted(sorted_keys, keys)
            if np.any(pos >= len(sorted_keys)) or np.any(sorted_keys[np.minimum(pos, len(sorted_keys) - 1)] != keys):
                raise ValueError("walk step leaves the domain along an unlisted edge")
            er.append(rows[out])
            ec.append(order[pos])
            ev.append(np.full(out.sum(), p))
    cat = lambda x, dt: np.concatenate(x).astype(dt) if x else np.zeros(0, dtype=dt)
    P = sp.csr_matrix((cat(pv, float), (cat(pr, np.int64), cat(pc, np.int64))), shape=(n, n))
    E = sp.csr_matrix((cat(ev, float), (cat(er, np.int64), cat(ec, np.int64))), shape=(n, len(D.boundary_pairs)))
    return P, E


_OPERATORS: "OrderedDict[tuple, WalkOperator]" = OrderedDict()
_MAX_CACHED = 6


def walk_operator(D: GridDomain, spec: LatticeWalkSpec | None = None) -> WalkOperator:
    """Assembled and factorized operator for ``(D, spec)`` (cached)."""
    spec = spec or square_walk()
    key = (id(D), D.digest(), spec.digest())
    op = _OPERATORS.get(key)
    if op is not None and op.domain is D:
        _OPERATORS.move_to_end(key)
        return op
    P, E = _assemble(D, spec)
    A = sp.identity(D.n, format="csr") - P
    op = WalkOperator(D, spec, P, E, LinearSystem(A, symmetric=spec.is_symmetric()))
    _OPERATORS[key] = op
    while len(_OPERATORS) > _MAX_CACHED:
        _OPERATORS.popitem(last=False)
    return op


def clear_operator_cache():
    _OPERATORS.clear()


def _unit(n, i):
    e = np.zeros(n)
    e[i] = 1.0
    return e


def _require_interior(D, v) -> int:
    i = D.index_of(v)
    if i < 0:
        raise ValueError(f"vertex {tuple(v)} is not interior")
    return i


# ---------------------------------------------------------------------------
# exact oracles


def green_row(D: GridDomain, u, spec: LatticeWalkSpec | None = None) -> np.ndarray:
    """``G_D(u, .)`` over all interior vertices."""
    op = walk_operator(D, spec)
    return op.system.solve_T(_unit(D.n, _require_interior(D, u)))


def green_column(D: GridDomain, v, spec: LatticeWalkSpec | None = None) -> np.ndarray:
    """``G_D(., v)`` over all interior vertices."""
    op = walk_operator(D, spec)
    return op.system.solve(_unit(D.n, _require_interior(D, v)))


def exact_green(D: GridDomain, u, v, spec: LatticeWalkSpec | None = None) -> float:
    """Expected number of visits to ``v`` by the walk from ``u`` before exit."""
    return float(green_row(D, u, spec)[_require_interior(D, v)])


def exact_hitting(D: GridDomain, start, spec: LatticeWalkSpec | None = None) -> np.ndarray:
    """Exit distribution from ``start``, aligned with ``D.boundary_pairs``."""
    op = walk_operator(D, spec)
    g = green_row(D, start, spec)
    return op.E.T @ g


def hitting_matrix(D: GridDomain, starts, spec: LatticeWalkSpec | None = None) -> np.ndarray:
    """Exit distributions from several starts, shape ``(len(starts), n_pairs)``."""
    op = walk_operator(D, spec)
    idx = [_require_interior(D, s) for s in np.asarray(starts).reshape(-1, 2)]
    B = np.zeros((D.n, len(idx)))
    B[idx, np.arange(len(idx))] = 1.0
    G = op.system.solve_T(B)
    return np.asarray((op.E.T @ G).T)


def hitting_column(D: GridDomain, pair_index: int, spec: LatticeWalkSpec | None = None) -> np.ndarray:
    """``x -> H_D(x, pair)`` over all interior vertices (harmonic in ``x``)."""
    op = walk_operator(D, spec)
    b = np.asarray(op.E[:, pair_index].todense()).ravel()
    return op.system.solve(b)


def visit_probability(D: GridDomain, x, v, spec: LatticeWalkSpec | None = None) -> float:
    """Probability that the walk from ``x`` visits ``v`` before exit (1 when ``x = v``)."""
    if np.array_equal(np.asarray(x), np.asarray(v)):
        return 1.0
    col = green_column(D, v, spec)
    return float(col[_require_interior(D, x)] / col[_require_interior(D, v)])


def mean_value_residual(D: GridDomain, values: np.ndarray, boundary_values: np.ndarray,
                        spec: LatticeWalkSpec | None = None) -> float:
    """Max deviation of ``values`` from the step-weighted neighbour average."""
    op = walk_operator(D, spec)
    avg = op.P @ values + op.E @ boundary_values
    return float(np.max(np.abs(avg - values)))


# ---------------------------------------------------------------------------
# sampling


@numba.njit(cache=True)
def _pick(cum, u):
    k = 0
    while k < len(cum) - 1 and u >= cum[k]:
        k += 1
    return k


@numba.njit(cache=True)
def _walk_kernel(idx, x, y, ox, oy, cum, rng, cap):
    n = 1024
    buf = np.empty((n, 2), dtype=np.int64)
    buf[0, 0] = x
    buf[0, 1] = y
    L = 1
    steps = 0
    while True:
        k = _pick(cum, rng.random())
        nx = x + ox[k]
        ny = y + oy[k]
        steps += 1
        if idx[nx, ny] < 0:
            return buf[:L], nx, ny, steps
        if steps >= cap:
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


def _kernel_args(D: GridDomain, spec: LatticeWalkSpec):
    offs = spec.offsets
    cum = np.cumsum(spec.probs)
    cum[-1] = 1.0
    return D.index_grid, D.origin, offs[:, 0].copy(), offs[:, 1].copy(), cum


def sample_walk(D: GridDomain, start, spec: LatticeWalkSpec | None = None,
                rng: np.random.Generator | None = None, cap: int = STEP_CAP) -> WalkPath:
    """Walk from ``start`` until its first step along an exit edge.

    Parameters
    ----------
    D : GridDomain
    start : (int, int)
        Interior start vertex.
    spec : LatticeWalkSpec, optional
    rng : numpy.random.Generator
    cap : int
        Step cap; exceeding it raises ``RuntimeError``.

    Returns
    -------
    WalkPath
        Interior vertices visited (with repetitions) and the exit pair.
    """
    spec = spec or square_walk()
    rng = rng if rng is not None else np.random.default_rng()
    _require_interior(D, start)
    idx, lo, ox, oy, cum = _kernel_args(D, spec)
    s = np.asarray(start, dtype=np.int64) - lo
    buf, nx, ny, steps = _walk_kernel(idx, int(s[0]), int(s[1]), ox, oy, cum, rng, cap)
    if steps < 0:
        raise RuntimeError(f"walk exceeded the step cap {cap}")
    verts = buf + lo
    last = verts[-1]
    pair = np.array([last[0], last[1], nx + lo[0], ny + lo[1]], dtype=np.int64)
    return WalkPath(verts, pair)


@numba.njit(cache=True)
def _exit_counts_kernel(idx, x0, y0, ox, oy, cum, rng, n, pair_id, m):
    counts = np.zeros(m, dtype=np.int64)
    visits = np.zeros(idx.shape, dtype=np.int64)
    for _ in range(n):
        x = x0
        y = y0
        visits[x, y] += 1
        while True:
            k = _pick(cum, rng.random())
            nx = x + ox[k]
            ny = y + oy[k]
            if idx[nx, ny] < 0:
                counts[pair_id[x, y, k]] += 1
                break
            x = nx
            y = ny
            visits[x, y] += 1
    return counts, visits


def _pair_id_table(D: GridDomain, spec: LatticeWalkSpec) -> np.ndarray:
    """``table[x, y, k]``: index of the pair used when offset ``k`` exits from grid cell ``(x, y)``."""
    idx, lo, ox, oy, _ = _kernel_args(D, spec)
    table = np.zeros(idx.shape + (len(ox),), dtype=np.int64)
    keys = _pair_keys(D.boundary_pairs)
    order = np.argsort(keys)
    for k in range(len(ox)):
        tgt = D.interior + np.array([ox[k], oy[k]])
        out = D.indices_of(tgt) < 0
        if out.any():
            kk = _pair_keys(np.concatenate([D.interior[out], tgt[out]], axis=1))
            pos = order[np.searchsorted(keys[order], kk)]
            g = D.interior[out] - lo
            table[g[:, 0], g[:, 1], k] = pos
    return table


def sample_exit_counts(D: GridDomain, start, n: int, spec: LatticeWalkSpec | None = None,
                       rng: np.random.Generator | None = None):
    """Monte Carlo exit-pair counts and interior visit counts over ``n`` walks.

    Returns
    -------
    counts : ndarray
        Aligned with ``D.boundary_pairs``.
    visits : ndarray
        Total visits per interior vertex (aligned with ``D.interior``).
    """
    spec = spec or square_walk()
    rng = rng if rng is not None else np.random.default_rng()
    _require_interior(D, start)
    idx, lo, ox, oy, cum = _kernel_args(D, spec)
    table = _pair_id_table(D, spec)
    s = np.asarray(start, dtype=np.int64) - lo
    counts, visits = _exit_counts_kernel(idx, int(s[0]), int(s[1]), ox, oy, cum, rng, int(n),
                                         table, len(D.boundary_pairs))
    g = D.interior - lo
    return counts, visits[g[:, 0], g[:, 1]]


# ---------------------------------------------------------------------------
# potential kernel


@dataclass
class PotentialKernel:
    """Box approximation of the potential kernel ``a`` with ``Delta_X a = delta_0``, ``a(0) = 0``.

    The box ``|x|, |y| <= box_radius`` (lattice coordinates) carries boundary
    values ``c1 log|u| + c2``. Since the solution is affine in ``c1``, the
    refinement ``c1 <- fitted slope`` is run on two stored solves until it
    reaches its fixed point. The error at ``z`` is ``O(|z| / box_radius)``.
    """

    spec: LatticeWalkSpec
    box_radius: int
    values: np.ndarray
    c1: float
    c2: float
    passes: int

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.int64)
        B = self.box_radius
        if np.any(np.abs(z) > B):
            raise ValueError("point outside the potential-kernel box")
        return self.values[z[..., 0] + B, z[..., 1] + B]

    def fit(self, rmin: float, rmax: float):
        """Least-squares ``(c1, c2)`` of ``a(z) ~ c1 log|z| + c2`` over ``rmin <= |z| <= rmax``."""
        B = self.box_radius
        xs = np.arange(-B, B + 1)
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        r = np.abs(self.spec.embed(np.stack([gx, gy], axis=-1)))
        m = (r >= rmin) & (r <= rmax)
        X = np.stack([np.log(r[m]), np.ones(m.sum())], axis=1)
        coef, *_ = np.linalg.lstsq(X, self.values[m], rcond=None)
        return float(coef[0]), float(coef[1])


_KERNELS: dict = {}


def potential_kernel_table(spec: LatticeWalkSpec | None, box_radius: int, fit_band=(1 / 8, 1 / 4),
                           max_passes: int = 60) -> PotentialKernel:
    """Solve for the potential kernel on a box (cached per spec and box size)."""
    spec = spec or square_walk()
    key = (spec.digest(), int(box_radius), tuple(fit_band))
    if key in _KERNELS:
        return _KERNELS[key]
    B = int(box_radius)
    box = build_box_domain(B, spec.lattice)
    op = walk_operator(box, spec)
    outer = box.boundary_pairs[:, 2:]
    logs = np.log(np.abs(spec.embed(outer)))
    i0 = box.index_of((0, 0))
    rhs = np.zeros((box.n, 2))
    rhs[i0, 0] = -1.0
    rhs[:, 1] = op.E @ logs
    sol = op.system.solve(rhs)
    A0, A1 = sol[:, 0], sol[:, 1]
    r = np.abs(spec.embed(box.interior))
    band = (r >= fit_band[0] * B) & (r <= fit_band[1] * B)
    X = np.stack([np.log(r[band]), np.ones(band.sum())], axis=1)
    proj = np.linalg.pinv(X)[0]
    s0, s1 = proj @ A0[band], proj @ A1[band]
    c1, passes = 0.0, 0
    while passes < max_passes:
        new = s0 + c1 * s1
        passes += 1
        done = abs(new - c1) < 1e-13 and passes >= 2
        c1 = new
        if done:
            break
    a = A0 + c1 * A1
    a = a - a[i0]
    values = np.zeros((2 * B + 1, 2 * B + 1))
    values[box.interior[:, 0] + B, box.interior[:, 1] + B] = a
    c2 = float(np.linalg.lstsq(X, a[band] - c1 * X[:, 0], rcond=None)[0][1])
    K = PotentialKernel(spec, B, values, float(c1), c2, passes)
    _KERNELS[key] = K
    return K


def potential_kernel(spec: LatticeWalkSpec | None, z, box_radius: int) -> float:
    """Potential kernel ``a(z)`` from a box of radius ``box_radius``.

    Requires ``box_radius >= 4 |z| + 16``.
    """
    spec = spec or square_walk()
    z = np.asarray(z, dtype=np.int64)
    if box_radius < 4 * np.abs(spec.embed(z)) + 16:
        raise ValueError("box too small for this point")
    if not np.any(z):
        return 0.0
    return float(potential_kernel_table(spec, box_radius)(z))


def check_aG_identity(D: GridDomain, z, w, spec: LatticeWalkSpec | None = None,
                      box_radius: int | None = None, reverse: bool = False) -> float:
    """Residual of ``a(z - w) + G(z, w) = E^z[a(S_tau - w)]``.

    With ``reverse=True`` the identity is checked for the reversed walk and its
    own potential kernel (which equals ``z -> a(-z)``).
    """
    spec = spec or square_walk()
    s = spec.reversed() if reverse else spec
    z = np.asarray(z, dtype=np.int64)
    w = np.asarray(w, dtype=np.int64)
    outer = D.boundary_pairs[:, 2:] - w
    need = max(int(np.abs(outer).max()), int(np.abs(z - w).max()))
    B = box_radius or max(4 * need + 16, 32)
    K = potential_kernel_table(s, B)
    H = exact_hitting(D, z, s)
    expect = float(H @ K(outer))
    return abs(float(K(z - w)) + exact_green(D, z, w, s) - expect)


# ---------------------------------------------------------------------------
# derived checks


def admissible_green(D: GridDomain, spec: LatticeWalkSpec | None = None):
    """``G_D(0, v)`` for all ``v`` with ``inr/200 < |v| < inr/5``.

    Returns
    -------
    vertices : ndarray
    values : ndarray
    """
    inr = D.inradius_origin
    r = np.abs(D.embed(D.interior))
    m = (r > inr / 200) & (r < inr / 5)
    g = green_row(D, (0, 0), spec)
    return D.interior[m], g[m]


def derivative_ratio(D: GridDomain, spec: LatticeWalkSpec | None = None) -> float:
    """``r * max |H(e, y) - H(0, y)| / H(0, y)`` over exit pairs and unit steps ``e``.

    ``r`` is the inradius at the origin. A bounded ratio across scales is the
    discrete derivative estimate for exit distributions.
    """
    spec = spec or square_walk()
    starts = np.vstack([[0, 0], spec.offsets[np.any(spec.offsets != 0, axis=1)]])
    H = hitting_matrix(D, starts, spec)
    h0 = H[0]
    ok = h0 > 0
    diff = np.abs(H[1:, ok] - h0[ok]) / h0[ok]
    return float(D.inradius_origin * diff.max())


# ---------------------------------------------------------------------------
# output


def table_header(seed=None, spec: LatticeWalkSpec | None = None, domain: GridDomain | None = None, **extra) -> str:
    parts = [f"seed={seed}"]
    parts.append(f"spec={spec.digest() if spec is not None else 'none'}")
    parts.append(f"domain={domain.digest() if domain is not None else 'none'}")
    parts += [f"{k}={v}" for k, v in sorted(extra.items())]
    return "# " + " ".join(parts)


def write_table_csv(path_or_buf, vertices, values, header: str) -> None:
    """Write ``x,y,value`` rows after a ``#`` header line."""
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        fh.write(header + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        for (x, y), v in zip(np.asarray(vertices).tolist(), np.asarray(values).tolist()):
            w.writerow([x, y, repr(float(v))])
    finally:
        if own:
            fh.close()
