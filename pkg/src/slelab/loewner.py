"""Loewner chains: elementary slit maps, SLE traces and driving-function extraction (zipper).

Chordal maps act on the upper half-plane with ``g(z) = z + 2t/z + ...``;
radial maps act on the unit disk with ``g(0) = 0``, ``g'(0) = e^t``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numba
import numpy as np

CHORDAL = "chordal"
RADIAL = "radial"
MIN_DT = 1e-14  # capacity assigned to a clamped (leaked) step


# ---------------------------------------------------------------------------
# elementary maps (numba kernels)


@numba.njit(cache=True)
def _hsqrt(q, ref):
    """Square root in the closed upper half-plane; on the real axis the sign follows ``ref``."""
    s = np.sqrt(q)
    if s.imag < 0:
        s = -s
    if s.imag == 0.0:
        a = abs(s.real)
        s = complex(a if ref >= 0 else -a, 0.0)
    return s


@numba.njit(cache=True)
def _slit_fwd(z, W, dt, side):
    d = z - W
    ref = d.real if d.real != 0.0 else side
    return W + _hsqrt(d * d + 4.0 * dt, ref)


@numba.njit(cache=True)
def _slit_inv(w, W, dt):
    d = w - W
    return W + _hsqrt(d * d - 4.0 * dt, d.real)


@numba.njit(cache=True)
def _chordal_fwd(z, Ws, dts, n, side):
    for k in range(n):
        z = _slit_fwd(z, Ws[k], dts[k], side)
    return z


@numba.njit(cache=True)
def _chordal_inv(w, Ws, dts, n):
    for k in range(n - 1, -1, -1):
        w = _slit_inv(w, Ws[k], dts[k])
    return w


@numba.njit(cache=True)
def _koebe(z):
    return z / ((1.0 + z) * (1.0 + z))


@numba.njit(cache=True)
def _koebe_inv(c):
    """Root of ``z / (1 + z)^2 = c`` in the closed unit disk."""
    s = np.sqrt(1.0 - 4.0 * c)
    d1 = (1.0 - 2.0 * c) + s
    d2 = (1.0 - 2.0 * c) - s
    d = d1 if abs(d1) >= abs(d2) else d2
    if d == 0:
        return complex(1.0, 0.0)
    return 2.0 * c / d


@numba.njit(cache=True)
def _rslit_fwd(z, theta, dt):
    """Radial slit map for driving point ``e^{i theta}`` and capacity ``dt``."""
    rot = np.exp(1j * theta)
    c = np.exp(dt)
    return rot * _koebe_inv(c * _koebe(z / rot))


@numba.njit(cache=True)
def _rslit_inv(w, theta, dt):
    rot = np.exp(1j * theta)
    c = np.exp(dt)
    return rot * _koebe_inv(_koebe(w / rot) / c)


@numba.njit(cache=True)
def _radial_fwd(z, th, dts, n):
    for k in range(n):
        z = _rslit_fwd(z, th[k], dts[k])
    return z


@numba.njit(cache=True)
def _radial_inv(w, th, dts, n):
    for k in range(n - 1, -1, -1):
        w = _rslit_inv(w, th[k], dts[k])
    return w


def radial_slit_dt(r: float) -> float:
    """Capacity of the radial slit ``[r, 1]``: ``log((1 + r)^2 / (4 r))``."""
    return float(np.log((1 + r) ** 2 / (4 * r)))


def radial_slit_tip(dt: float) -> float:
    """Inner end ``r`` of the radial slit with capacity ``dt``."""
    c = np.exp(dt)
    # (1 + r)^2 = 4 c r
    b = 2 - 4 * c
    return float((-b - np.sqrt(b * b - 4)) / 2)


# ---------------------------------------------------------------------------
# elementary step objects


@dataclass(frozen=True)
class ChordalStep:
    """Vertical-slit map ``z -> W + sqrt((z - W)^2 + 4 dt)``; removes ``[W, W + 2i sqrt(dt)]``."""

    W: float
    dt: float

    def __call__(self, z, side: int = 1):
        """Evaluate; ``side`` (+1 right, -1 left) resolves points on the slit itself."""
        f = np.vectorize(lambda x: _slit_fwd(complex(x), self.W, self.dt, float(side)), otypes=[complex])
        out = f(np.asarray(z, dtype=complex))
        return out[()] if np.ndim(out) == 0 else out

    def inverse(self, w):
        f = np.vectorize(lambda x: _slit_inv(complex(x), self.W, self.dt), otypes=[complex])
        out = f(np.asarray(w, dtype=complex))
        return out[()] if np.ndim(out) == 0 else out

    @property
    def tip(self) -> complex:
        return complex(self.W, 2 * np.sqrt(self.dt))


def chordal_slit_step(W: float, dt: float) -> ChordalStep:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return ChordalStep(float(W), float(dt))


@numba.njit(cache=True)
def _radial_rhs(g, W):
    return g * (W + g) / (W - g)


@numba.njit(cache=True)
def _radial_rk4(z, W, dt, substeps, sign, eps):
    """Integrate ``g' = sign * g (W + g) / (W - g)``; returns ``(g, g'(z) factor, absorbed)``."""
    h = sign * dt / substeps
    g = z
    D = complex(1.0, 0.0)
    for _ in range(substeps):
        if abs(W - g) < eps:
            return g, D, True
        # derivative of the field: d/dg [g (W + g) / (W - g)]
        k1 = _radial_rhs(g, W)
        j1 = (W * W + 2 * W * g - g * g) / ((W - g) * (W - g))
        g2 = g + 0.5 * h * k1
        D2 = D + 0.5 * h * j1 * D
        k2 = _radial_rhs(g2, W)
        j2 = (W * W + 2 * W * g2 - g2 * g2) / ((W - g2) * (W - g2))
        g3 = g + 0.5 * h * k2
        D3 = D + 0.5 * h * j2 * D2
        k3 = _radial_rhs(g3, W)
        j3 = (W * W + 2 * W * g3 - g3 * g3) / ((W - g3) * (W - g3))
        g4 = g + h * k3
        D4 = D + h * j3 * D3
        k4 = _radial_rhs(g4, W)
        j4 = (W * W + 2 * W * g4 - g4 * g4) / ((W - g4) * (W - g4))
        g = g + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        D = D + h * (j1 * D + 2 * j2 * D2 + 2 * j3 * D3 + j4 * D4) / 6.0
    return g, D, False


@dataclass(frozen=True)
class RadialStep:
    """Radial Loewner flow over time ``dt`` with constant driving point ``e^{i theta}`` (RK4)."""

    theta: float
    dt: float
    substeps: int = 200

    @property
    def W(self) -> complex:
        return complex(np.exp(1j * self.theta))

    def flow(self, z, eps: float = 1e-12):
        """Forward flow: returns ``(g(z), g'(z), absorbed)`` arrays."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = [_radial_rk4(complex(x), self.W, self.dt, self.substeps, 1.0, eps) for x in z]
        g = np.array([o[0] for o in out])
        d = np.array([o[1] for o in out])
        ab = np.array([o[2] for o in out])
        g[ab] = np.nan
        return g, d, ab

    def __call__(self, z):
        g = self.flow(z)[0]
        return g[0] if np.ndim(z) == 0 else g

    def inverse(self, w):
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        g = np.array([_radial_rk4(complex(x), self.W, self.dt, self.substeps, -1.0, 0.0)[0] for x in w])
        return g[0] if g.size == 1 and np.ndim(w) == 0 else g

    def derivative_at_zero(self) -> complex:
        return complex(self.flow(0j)[1][0])

    def exact(self, z):
        """Closed-form radial slit map with the same driving point and capacity."""
        f = np.vectorize(lambda x: _rslit_fwd(complex(x), self.theta, self.dt), otypes=[complex])
        return f(np.asarray(z, dtype=complex))


def radial_step(theta: float, dt: float, substeps: int = 200) -> RadialStep:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    return RadialStep(float(theta), float(dt), int(substeps))


# ---------------------------------------------------------------------------
# chains and records


@dataclass
class ConformalChain:
    """Composition ``g = f_n o ... o f_1`` of elementary slit maps.

    ``values[k]`` is the real driving point (chordal) or the driving angle
    (radial) of step ``k``; ``dts[k]`` its capacity increment.
    """

    mode: str
    values: np.ndarray
    dts: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.dts = np.asarray(self.dts, dtype=float)
        if self.mode not in (CHORDAL, RADIAL):
            raise ValueError("mode must be 'chordal' or 'radial'")

    def __len__(self):
        return len(self.dts)

    @property
    def capacity(self) -> float:
        return float(self.dts.sum())

    def forward(self, z, n: int | None = None, side: float = 1.0):
        """``g_n(z)``: map the slit domain onto the half-plane / disk."""
        n = len(self) if n is None else int(n)
        z = np.asarray(z, dtype=complex)
        if self.mode == CHORDAL:
            f = lambda x: _chordal_fwd(complex(x), self.values, self.dts, n, side)
        else:
            f = lambda x: _radial_fwd(complex(x), self.values, self.dts, n)
        out = np.vectorize(f, otypes=[complex])(z)
        return out[()] if out.ndim == 0 else out

    def inverse(self, w, n: int | None = None):
        """``g_n^{-1}(w)``."""
        n = len(self) if n is None else int(n)
        w = np.asarray(w, dtype=complex)
        if self.mode == CHORDAL:
            f = lambda x: _chordal_inv(complex(x), self.values, self.dts, n)
        else:
            f = lambda x: _radial_inv(complex(x), self.values, self.dts, n)
        out = np.vectorize(f, otypes=[complex])(w)
        return out[()] if out.ndim == 0 else out

    def tips(self) -> np.ndarray:
        """``gamma(t_k) = g_k^{-1}(driving point of step k)`` for ``k = 1..n``."""
        if self.mode == CHORDAL:
            return _chordal_tips(self.values, self.dts)
        return _radial_tips(self.values, self.dts)

    def derivative_at_zero(self, h: float = 1e-7) -> float:
        """Numerical ``|g'(0)|`` (radial)."""
        return float(abs(self.forward(h)) / h)


@numba.njit(cache=True)
def _chordal_tips(Ws, dts):
    n = len(Ws)
    out = np.empty(n, dtype=np.complex128)
    for k in range(n):
        out[k] = _chordal_inv(complex(Ws[k], 0.0), Ws, dts, k + 1)
    return out


@numba.njit(cache=True)
def _radial_tips(th, dts):
    n = len(th)
    out = np.empty(n, dtype=np.complex128)
    for k in range(n):
        out[k] = _radial_inv(np.exp(1j * th[k]), th, dts, k + 1)
    return out


@dataclass
class DrivingRecord:
    """Driving function samples ``values[k]`` at capacities ``times[k]`` (``times[0] = 0``).

    ``s[k]`` is the curve parameter (index along the input polyline) of the
    point fitted at step ``k``.
    """

    mode: str
    times: np.ndarray
    values: np.ndarray
    s: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.s is None:
            self.s = np.arange(len(self.times), dtype=float)
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("capacities must increase strictly")
        if self.mode == RADIAL and len(self.values) > 1 and np.any(np.abs(np.diff(self.values)) > np.pi):
            raise ValueError("radial values must be a continuous lift")

    def __len__(self):
        return len(self.times)

    def chain(self) -> ConformalChain:
        return ConformalChain(self.mode, self.values[1:], np.diff(self.times))

    def value_at(self, t) -> np.ndarray:
        """Driving value at capacities ``t`` (linear interpolation)."""
        return np.interp(t, self.times, self.values)

    def at_curve_index(self) -> np.ndarray:
        """Record indices whose fitted point is a vertex of the input polyline."""
        return np.nonzero(np.abs(self.s - np.round(self.s)) < 1e-12)[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,value\n")
        for t, v in zip(self.times, self.values):
            buf.write(f"{t:.17g},{v:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, mode: str) -> "DrivingRecord":
        a = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        return cls(mode, a[:, 0], a[:, 1])


def curve_to_csv(times, points) -> str:
    buf = io.StringIO()
    buf.write("t,re,im\n")
    for t, z in zip(times, points):
        buf.write(f"{t:.17g},{z.real:.17g},{z.imag:.17g}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# zipper


@numba.njit(cache=True)
def _point(z, s):
    i = int(np.floor(s))
    if i >= len(z) - 1:
        return z[len(z) - 1]
    f = s - i
    return z[i] + f * (z[i + 1] - z[i])


@numba.njit(cache=True)
def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


@numba.njit(cache=True)
def _zipper(z, radial, max_dt, T, adaptive, max_steps, min_stride):
    """Fit one slit per accepted curve point.

    Returns driving values, capacity increments, curve parameters, the
    number of clamped steps and the number of points skipped because their
    increment was below float resolution.
    """
    N = len(z) - 1
    vals = np.empty(max_steps + 1)
    dts = np.empty(max_steps + 1)
    ss = np.empty(max_steps + 1)
    if radial:
        vals[0] = np.angle(z[0])
    else:
        vals[0] = z[0].real
    dts[0] = 0.0
    ss[0] = 0.0
    n = 0
    total = 0.0
    pos = 0.0
    stride = 1.0
    leaks = 0
    skipped = 0
    while pos < N and total < T and n < max_steps:
        if adaptive:
            trial = min(pos + stride, float(N))
        else:
            nxt = np.floor(pos + 1e-12) + 1.0
            trial = min(pos + stride, nxt)
        q = _point(z, trial)
        if radial:
            p = _radial_fwd(q, vals[1:], dts[1:], n)
            bad = not (abs(p) < 1.0)
        else:
            p = _chordal_fwd(q, vals[1:], dts[1:], n, 1.0)
            bad = not (p.imag > 0.0)
        if bad and trial - pos > min_stride:
            stride = (trial - pos) / 2
            continue
        if radial:
            if bad:
                r = 1.0 - 1e-15
                leaks += 1
            else:
                r = abs(p)
            if r < 1e-300:
                break
            th = vals[n] + _wrap(np.angle(p) - vals[n])
            dt = np.log((1.0 + r) * (1.0 + r) / (4.0 * r))
        else:
            if bad:
                dt = MIN_DT
                leaks += 1
            else:
                dt = p.imag * p.imag / 4.0
            th = p.real
        if dt > max_dt and trial - pos > min_stride:
            stride = (trial - pos) / 2
            continue
        if dt <= 0.0:
            dt = MIN_DT
            leaks += 1
        if total + dt <= total:
            # increment below float resolution: the point adds no capacity
            pos = trial
            skipped += 1
            if adaptive:
                stride *= 2
            continue
        n += 1
        vals[n] = th
        dts[n] = dt
        ss[n] = trial
        total += dt
        pos = trial
        if adaptive:
            if dt < max_dt / 4:
                stride *= 2
        else:
            stride = min(1.0, 2 * stride)
    return vals[: n + 1], dts[: n + 1], ss[: n + 1], leaks, skipped


def extract_driving(curve, mode: str, max_dt: float | None = None, T: float | None = None,
                    adaptive: bool = False, max_steps: int = 200000, min_stride: float = 1e-6):
    """Driving function of a polyline curve by the zipper.

    Parameters
    ----------
    curve : array_like of complex
        ``curve[0]`` on the boundary (real axis or unit circle); the rest in
        the open domain.
    mode : {"chordal", "radial"}
    max_dt : float, optional
        Cap on each capacity increment; longer steps are split by inserting
        points along the polyline.
    T : float, optional
        Stop once the total capacity reaches ``T``.
    adaptive : bool
        Allow steps that skip polyline vertices (stride grows while the
        increments stay below ``max_dt / 4``).

    Returns
    -------
    DrivingRecord, ConformalChain
    """
    if mode not in (CHORDAL, RADIAL):
        raise ValueError("mode must be 'chordal' or 'radial'")
    z = np.asarray(curve, dtype=complex).ravel()
    if len(z) < 2:
        raise ValueError("curve needs at least two points")
    radial = mode == RADIAL
    if radial and abs(abs(z[0]) - 1) > 1e-9:
        raise ValueError("radial curve must start on the unit circle")
    if not radial and abs(z[0].imag) > 1e-12:
        raise ValueError("chordal curve must start on the real axis")
    md = np.inf if max_dt is None else float(max_dt)
    if adaptive and not np.isfinite(md):
        raise ValueError("adaptive extraction needs max_dt")
    vals, dts, ss, leaks, skipped = _zipper(z, radial, md, np.inf if T is None else float(T), bool(adaptive),
                                      int(max_steps), float(min_stride))
    times = np.cumsum(dts)
    if np.any(np.diff(times) <= 0):
        raise RuntimeError("non-monotone capacity")
    rec = DrivingRecord(mode, times, vals, ss, {"clamped_steps": int(leaks), "skipped_points": int(skipped), "reached_T": bool(T is None or times[-1] >= T)})
    return rec, rec.chain()


# ---------------------------------------------------------------------------
# SLE


def sle_driving(kappa: float, T: float, dt: float, rng: np.random.Generator, mode: str = CHORDAL,
                start: float = 0.0) -> DrivingRecord:
    """Brownian driving ``B(kappa t)`` (chordal value or radial angle) on a uniform grid."""
    if not dt > 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    n = int(round(T / dt))
    inc = rng.standard_normal(n) * np.sqrt(kappa * dt)
    vals = start + np.concatenate([[0.0], np.cumsum(inc)])
    times = dt * np.arange(n + 1)
    if mode == RADIAL and n and np.any(np.abs(inc) > np.pi):
        raise ValueError("radial increments exceed pi; reduce dt")
    return DrivingRecord(mode, times, vals)


def sle_trace(kappa: float, mode: str, T: float, dt: float, rng: np.random.Generator,
              start: float = 0.0):
    """SLE(kappa) tips ``gamma(t_k)`` from piecewise-constant Brownian driving.

    Returns
    -------
    times : ndarray
    points : ndarray of complex
        ``points[0]`` is the start on the boundary.
    record : DrivingRecord
    """
    rec = sle_driving(kappa, T, dt, rng, mode, start)
    tips = rec.chain().tips()
    z0 = complex(rec.values[0], 0.0) if mode == CHORDAL else complex(np.exp(1j * rec.values[0]))
    return rec.times, np.concatenate([[z0], tips]), rec


def coverage_fraction(points, window=None, cells: int = 20) -> float:
    """Fraction of grid cells of ``window`` that contain a curve point.

    ``window = (x0, x1, y0, y1)`` defaults to the bounding box of the points
    down to the real axis.
    """
    z = np.asarray(points)
    if window is None:
        window = (z.real.min(), z.real.max() + 1e-12, 0.0, z.imag.max() + 1e-12)
    x0, x1, y0, y1 = window
    ok = (z.real >= x0) & (z.real < x1) & (z.imag >= y0) & (z.imag < y1)
    i = ((z.real[ok] - x0) / (x1 - x0) * cells).astype(int)
    j = ((z.imag[ok] - y0) / (y1 - y0) * cells).astype(int)
    return len(set(zip(i.tolist(), j.tolist()))) / cells ** 2


# ---------------------------------------------------------------------------
# diameter check


def _diameter(pts: np.ndarray) -> float:
    pts = np.asarray(pts)
    if len(pts) > 64:
        from scipy.spatial import ConvexHull
        xy = np.stack([pts.real, pts.imag], axis=1)
        try:
            pts = pts[ConvexHull(xy).vertices]
        except Exception:
            pass
    d = np.abs(pts[:, None] - pts[None, :])
    return float(d.max())


def diam_vs_k_check(record: DrivingRecord, checkpoints=None) -> dict:
    """Ratio ``diam(K_t) / k(t)`` with ``k(t) = sqrt(t) + max |W(s) - W(0)|``.

    The hull diameter is the diameter of the tips together with the start
    point; filled-in regions lie in the convex hull of that set.
    """
    tips = record.chain().tips()
    if record.mode == CHORDAL:
        z0 = complex(record.values[0], 0.0)
        W = record.values.astype(complex)
    else:
        z0 = complex(np.exp(1j * record.values[0]))
        W = np.exp(1j * record.values)
    pts = np.concatenate([[z0], tips])
    idx = np.arange(1, len(record)) if checkpoints is None else np.searchsorted(record.times, checkpoints)
    idx = idx[(idx >= 1) & (idx < len(record))]
    ratios = []
    for k in idx:
        kt = np.sqrt(record.times[k]) + np.abs(W[: k + 1] - W[0]).max()
        ratios.append(_diameter(pts[: k + 1]) / kt)
    r = np.array(ratios)
    return {"times": record.times[idx], "ratios": r,
            "min": float(r.min()) if len(r) else float("nan"),
            "max": float(r.max()) if len(r) else float("nan")}
