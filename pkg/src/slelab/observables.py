"""Martingale observables and driving-process statistics for LERW and the UST Peano curve."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .lattice import GridDomain, LatticeWalkSpec, build_disk_domain, square_walk
from .lerw import sample_lerw_reversed
from .loewner import CHORDAL, RADIAL, extract_driving, sle_trace
from .peano import peano_curve, sample_tree
from .peano_config import PeanoConfig, disk_peano_config
from .rng import STREAM_LERW, STREAM_MIRROR, STREAM_SLE, STREAM_UST, make_rng
from .walks import green_row, walk_operator

LEVEL = 0.001
KEY_C0 = 10.0
VAR_BANDS = {"lerw": (1.6, 2.4), "peano": (6.0, 10.0), "sle2": (1.8, 2.2)}
MAX_DROP = 0.01
ZIPPER_RESOLUTION = 1e-3  # capacity increment cap as a fraction of the horizon


@dataclass
class KeyEstimateSample:
    """One stopped sample: ``m_stop``, ``Delta_m``, ``t_m``."""

    delta: float
    m_stop: int
    Delta_m: float
    t_m: float
    domain: str


def report(estimate, stderr, n, test, p_value, verdict, **extra) -> dict:
    """Report with fields ``{estimate, stderr, n, test, p_value, verdict}``."""
    out = {"estimate": estimate, "stderr": stderr, "n": int(n), "test": test,
           "p_value": p_value, "verdict": verdict}
    out.update(extra)
    return out


def to_json(rep: dict) -> str:
    def conv(x):
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        if isinstance(x, np.ndarray):
            return x.tolist()
        if isinstance(x, np.bool_):
            return bool(x)
        raise TypeError(type(x))
    return json.dumps(rep, default=conv, indent=2, sort_keys=True)


def with_rerun(run, n: int) -> dict:
    """Run ``run(n, offset)``; on a failing verdict rerun once with ``4 n`` fresh replicas."""
    rep = run(n, 0)
    if rep["verdict"] == "fail":
        rep = run(4 * n, n)
        rep["rerun"] = True
    return rep


# ---------------------------------------------------------------------------
# curves in the reference domains


def lerw_curve(D: GridDomain, R: float, rng, spec: LatticeWalkSpec | None = None,
               mirror: bool = False) -> np.ndarray:
    """Reversed LERW from the boundary to 0, scaled to the unit disk.

    The first point is the exit edge midpoint projected to the circle.
    ``mirror`` reflects the path in the real axis.
    """
    dec = sample_lerw_reversed(D, spec, rng)
    g = dec.gamma.vertices.astype(float)
    z = (g[:, 0] + 1j * g[:, 1]) / R
    mid = (g[0] + g[1]) / 2
    z[0] = np.exp(1j * np.arctan2(mid[1], mid[0]))
    if mirror:
        z = np.conj(z)
    return z


def radial_prefix(z: np.ndarray, T: float) -> np.ndarray:
    """Shortest prefix of a radial curve whose capacity is certainly above ``T``.

    By the Koebe quarter theorem the hull has capacity above ``T`` once the
    curve enters ``|z| < exp(-T) / 4``.
    """
    inside = np.nonzero(np.abs(z) < np.exp(-T) / 4)[0]
    return z if len(inside) == 0 else z[: inside[0] + 1]


def halfplane_map(ua: complex, ub: complex):
    """Moebius map of the unit disk onto the upper half-plane with ``ua -> 0``, ``ub -> inf``, ``|f(0)| = 1``."""
    f0 = lambda z: (z - ua) / (z - ub)
    probe = np.exp(1j * (np.angle(ua) + 0.5 * np.mod(np.angle(ub) - np.angle(ua), 2 * np.pi)))
    rot = np.exp(-1j * np.angle(f0(probe)))
    c = rot / abs(f0(0j))
    if (c * f0(0j)).imag < 0:
        c = -c
    return lambda z: c * f0(np.asarray(z, dtype=complex))


def peano_curve_points(cfg: PeanoConfig, rng, mirror: bool = False) -> np.ndarray:
    """Peano curve of a uniform tree mapped to the upper half-plane (``a -> 0``, ``b -> inf``)."""
    T = sample_tree(cfg, rng)
    g = peano_curve(T, cfg, check=False).vertices / 4.0
    z = g[:, 0] + 1j * g[:, 1]
    R = cfg.meta.get("r_eff") or float(np.abs(z).max() + 0.5)
    shape = cfg.meta["shape"]
    if shape.get("kind") != "disk":
        raise ValueError("Peano observables need a disk configuration")
    ua = complex(*cfg.meta["a"]) / shape["radius"]
    ub = complex(*cfg.meta["b"]) / shape["radius"]
    h = halfplane_map(ua / abs(ua), ub / abs(ub))(z / R)
    h[0] = 0.0
    if mirror:
        h = -np.conj(h)
    return h


# ---------------------------------------------------------------------------
# key estimates


def stopping_index(times: np.ndarray, disp: np.ndarray, delta: float) -> int:
    """First ``j`` with ``t_j >= delta^2`` or ``|disp_j| >= delta``; -1 if none."""
    hit = (times >= delta ** 2) | (np.abs(disp) >= delta)
    k = np.nonzero(hit)[0]
    return int(k[0]) if len(k) else -1


def _key_sample_lerw(D, R, delta, rng, spec, mirror):
    z = lerw_curve(D, R, rng, spec, mirror)
    T = delta ** 2
    # past delta^2 so that a whole curve index crosses the time threshold
    rec, _ = extract_driving(radial_prefix(z, 1.5 * T), RADIAL, max_dt=ZIPPER_RESOLUTION * T, T=1.5 * T)
    idx = rec.at_curve_index()
    t = rec.times[idx]
    disp = rec.values[idx] - rec.values[0]
    m = stopping_index(t, disp, delta)
    ok = m >= 0 and rec.meta["clamped_steps"] == 0
    return KeyEstimateSample(delta, int(rec.s[idx[m]]) if m >= 0 else -1,
                             float(disp[m]) if m >= 0 else np.nan,
                             float(t[m]) if m >= 0 else np.nan, f"disk R={R}"), ok


def _key_sample_peano(cfg, delta, rng, mirror):
    z = peano_curve_points(cfg, rng, mirror)
    T = delta ** 2
    rec, _ = extract_driving(z, CHORDAL, max_dt=ZIPPER_RESOLUTION * T, T=1.5 * T, adaptive=True)
    disp = rec.values - rec.values[0]
    m = stopping_index(rec.times, disp, delta)
    ok = m >= 0 and rec.meta["clamped_steps"] == 0
    return KeyEstimateSample(delta, int(np.floor(rec.s[m])) if m >= 0 else -1,
                             float(disp[m]) if m >= 0 else np.nan,
                             float(rec.times[m]) if m >= 0 else np.nan, "peano"), ok


def _moment_report(samples, ok, delta, kappa, name) -> dict:
    S = [s for s, good in zip(samples, ok) if good]
    n_drop = len(samples) - len(S)
    D = np.array([s.Delta_m for s in S])
    t = np.array([s.t_m for s in S])
    n = len(S)
    bound = 2 * delta ** 3 * KEY_C0
    m1, se1 = float(D.mean()), float(D.std(ddof=1) / np.sqrt(n))
    q = D ** 2 - kappa * t
    m2, se2 = float(q.mean()), float(q.std(ddof=1) / np.sqrt(n))
    pass1 = abs(m1) < max(3 * se1, bound)
    pass2 = abs(m2) < max(3 * se2, bound)
    inconclusive = n_drop > MAX_DROP * len(samples)
    verdict = "inconclusive" if inconclusive else ("pass" if pass1 and pass2 else "fail")
    return report(
        {"mean_delta": m1, f"second_moment_minus_{kappa:g}t": m2},
        {"mean_delta": se1, f"second_moment_minus_{kappa:g}t": se2},
        n, f"{name} key estimate: |mean| < max(3 SE, {bound:.4g})", None, verdict,
        delta=delta, bound=bound, dropped=n_drop,
        overshoot={"disp": float(np.max(np.abs(D)) - delta), "time": float(t.max() - delta ** 2)},
        mean_t=float(t.mean()), samples={"Delta_m": D, "t_m": t, "m": np.array([s.m_stop for s in S])})


def lerw_key_estimate(R: float, delta: float, n_samples: int, seed: int = 0, spec=None,
                      mirror: bool = False, offset: int = 0, enforce_scale: bool = True) -> dict:
    """Moments of the stopped radial LERW driving function on the disk of radius ``R``.

    Reports ``E[Delta_m]`` and ``E[Delta_m^2] - 2 E[t_m]`` with standard
    errors; each must be below ``max(3 SE, 2 delta^3 C0)``.
    """
    if enforce_scale and R < 50 / delta:
        raise ValueError("need R >= 50 / delta")
    D = build_disk_domain(R)
    stream = STREAM_MIRROR if mirror else STREAM_LERW
    samples, ok = [], []
    for k in range(n_samples):
        s, good = _key_sample_lerw(D, R, delta, make_rng(seed, offset + k, stream), spec, mirror)
        samples.append(s)
        ok.append(good)
    return _moment_report(samples, ok, delta, 2.0, "LERW")


def mirrored_pair(R: float, delta: float, n_samples: int, seed: int = 0) -> tuple:
    """``Delta_m`` samples from the same walks and their reflections."""
    D = build_disk_domain(R)
    a, b = [], []
    for k in range(n_samples):
        a.append(_key_sample_lerw(D, R, delta, make_rng(seed, k, STREAM_MIRROR), None, False)[0].Delta_m)
        b.append(_key_sample_lerw(D, R, delta, make_rng(seed, k, STREAM_MIRROR), None, True)[0].Delta_m)
    return np.array(a), np.array(b)


def peano_key_estimate(scale: float, delta: float, n_samples: int, seed: int = 0,
                       mirror: bool = False, offset: int = 0, theta_a: float = np.pi,
                       theta_b: float = 0.0) -> dict:
    """Moments ``E[W_m]`` and ``E[W_m^2] - 8 E[t_m]`` of the stopped Peano driving function.

    The marked points sit at ``theta_a`` and ``theta_b``; the harmonic
    measure of ``alpha`` seen from 0 must lie in ``[0.1, 0.9]``.
    """
    omega = np.mod(theta_b - theta_a, 2 * np.pi) / (2 * np.pi)
    if not 0.1 <= omega <= 0.9:
        raise ValueError(f"harmonic measure of alpha from 0 is {omega:.3f}, outside [0.1, 0.9]")
    cfg = disk_peano_config(scale, theta_a, theta_b)
    samples, ok = [], []
    for k in range(n_samples):
        s, good = _key_sample_peano(cfg, delta, make_rng(seed, offset + k, STREAM_UST), mirror)
        samples.append(s)
        ok.append(good)
    return _moment_report(samples, ok, delta, 8.0, "Peano")


def overshoot_trend(radii=(100, 200, 400), delta: float = 0.3, n_samples: int = 100,
                    seed: int = 0) -> dict:
    """Mean stopping overshoot beyond the stopping thresholds for each radius.

    The overshoot of a sample is ``max(|Delta_m| - delta, t_m - delta^2, 0)``
    relative to the threshold it crossed.
    """
    out = {}
    for R in radii:
        rep = lerw_key_estimate(R, delta, n_samples, seed, enforce_scale=False)
        D = np.abs(rep["samples"]["Delta_m"])
        t = rep["samples"]["t_m"]
        o = np.maximum(np.maximum(D / delta - 1, t / delta ** 2 - 1), 0.0)
        out[int(R)] = {"mean": float(o.mean()), "stderr": float(o.std(ddof=1) / np.sqrt(len(o)))}
    means = [out[int(R)]["mean"] for R in radii]
    out["decreasing"] = bool(np.all(np.diff(means) < 0))
    return out


# ---------------------------------------------------------------------------
# driving convergence


@dataclass
class IncrementDataset:
    """Driving values on a shared capacity grid; ``values[r, j]`` is replica ``r`` at ``grid[j]``."""

    grid: np.ndarray
    values: np.ndarray
    truncated: np.ndarray
    horizon: float
    mode: str

    def to_csv(self) -> str:
        head = "replica,truncated," + ",".join(f"t={t:.6g}" for t in self.grid)
        rows = [f"{r},{int(tr)}," + ",".join(f"{v:.17g}" for v in row)
                for r, (row, tr) in enumerate(zip(self.values, self.truncated))]
        return "\n".join([head] + rows) + "\n"


def driving_samples(model: str, scale: float, T: float, n_samples: int, seed: int = 0,
                    n_grid: int = 4, offset: int = 0, kappa: float = 2.0) -> IncrementDataset:
    """Driving values ``W(t) - W(0)`` at ``t = T k / n_grid`` for ``n_samples`` replicas.

    ``model`` is ``"lerw"`` (disk radius ``scale``), ``"peano"`` (disk
    configuration of radius ``scale``) or ``"sle"`` (chordal SLE(kappa)
    traces with ``scale`` steps per unit capacity, re-extracted by the zipper).
    """
    grid = T * np.arange(1, n_grid + 1) / n_grid
    vals = np.full((n_samples, n_grid), np.nan)
    trunc = np.zeros(n_samples, dtype=bool)
    if model == "lerw":
        D = build_disk_domain(scale)
        mode = RADIAL
    elif model == "peano":
        cfg = disk_peano_config(scale)
        mode = CHORDAL
    elif model == "sle":
        mode = CHORDAL
    else:
        raise ValueError(f"unknown model {model!r}")
    for k in range(n_samples):
        r = offset + k
        if model == "lerw":
            z = lerw_curve(D, scale, make_rng(seed, r, STREAM_LERW))
            rec, _ = extract_driving(radial_prefix(z, T), RADIAL, max_dt=ZIPPER_RESOLUTION * T, T=T)
        elif model == "peano":
            z = peano_curve_points(cfg, make_rng(seed, r, STREAM_UST))
            rec, _ = extract_driving(z, CHORDAL, max_dt=ZIPPER_RESOLUTION * T, T=T, adaptive=True)
        else:
            _, z, _ = sle_trace(kappa, CHORDAL, T * 1.01, 1.0 / scale, make_rng(seed, r, STREAM_SLE))
            rec, _ = extract_driving(z, CHORDAL, max_dt=ZIPPER_RESOLUTION * T, T=T)
        if rec.times[-1] < T or rec.meta["clamped_steps"] > 0:
            trunc[k] = True
            continue
        vals[k] = rec.value_at(grid) - rec.values[0]
    return IncrementDataset(grid, vals, trunc, T, mode)


def increment_tests(data: IncrementDataset, kappa: float, band) -> dict:
    """Mean, variance band, normality and independence tests on the driving increments."""
    V = data.values[~data.truncated]
    n = len(V)
    grid = data.grid
    inc = np.diff(np.concatenate([np.zeros((n, 1)), V], axis=1), axis=1)
    dt = np.diff(np.concatenate([[0.0], grid]))
    means = inc.mean(axis=0)
    ses = inc.std(axis=0, ddof=1) / np.sqrt(n)
    means_ok = bool(np.all(np.abs(means) < 3 * ses))
    var_T = float(V[:, -1].var(ddof=1))
    ratio = var_T / data.horizon
    var_ok = band[0] <= ratio <= band[1]
    # normality of standardized increments (Kolmogorov-Smirnov), Bonferroni over grid cells
    pvals = []
    for j in range(inc.shape[1]):
        x = inc[:, j]
        pvals.append(float(stats.kstest((x - x.mean()) / x.std(ddof=1), "norm").pvalue))
    p_norm = min(1.0, min(pvals) * len(pvals))
    norm_ok = p_norm > LEVEL
    # independence of disjoint increments
    h = inc.shape[1] // 2
    a = inc[:, :h].sum(axis=1)
    b = inc[:, h:].sum(axis=1)
    rho = float(np.corrcoef(a, b)[0, 1])
    rho_ok = abs(rho) < 3 / np.sqrt(n)
    drop = float(data.truncated.mean())
    inconclusive = drop > MAX_DROP
    verdict = "inconclusive" if inconclusive else ("pass" if means_ok and var_ok and norm_ok and rho_ok else "fail")
    return report(ratio, float(ratio * np.sqrt(2 / (n - 1))), n,
                  f"Var(W(T))/T in {list(band)}; means < 3 SE; KS normality; |rho| < 3/sqrt(N)",
                  p_norm, verdict, kappa_expected=kappa, var_ratio=ratio, band=list(band),
                  var_per_cell=(inc.var(axis=0, ddof=1) / dt).tolist(), means=means.tolist(),
                  mean_se=ses.tolist(), means_ok=means_ok, var_ok=var_ok, normality_ok=norm_ok,
                  rho=rho, rho_bound=float(3 / np.sqrt(n)), rho_ok=rho_ok, drop_fraction=drop)


def driving_convergence(model: str, kappa_expected: float, scale: float, T: float, n_samples: int,
                        seed: int = 0, band=None, n_grid: int = 4, rerun: bool = True) -> dict:
    """Test that the driving process is Brownian motion with speed ``kappa_expected`` up to ``T``."""
    if model == "lerw" and T > 0.5:
        raise ValueError("radial horizon must be <= 0.5")
    if n_samples < 200:
        raise ValueError("need at least 200 samples")
    band = band or VAR_BANDS.get(model, (0.9 * kappa_expected, 1.1 * kappa_expected))

    def run(n, offset):
        data = driving_samples(model, scale, T, n, seed, n_grid, offset, kappa=kappa_expected)
        rep = increment_tests(data, kappa_expected, band)
        rep["model"] = model
        rep["scale"] = scale
        rep["T"] = T
        rep["dataset"] = data
        return rep

    return with_rerun(run, n_samples) if rerun else run(n_samples, 0)


# ---------------------------------------------------------------------------
# lambda martingale


def _local_green_values(D: GridDomain, spec, paths: np.ndarray, batch: int = 256) -> np.ndarray:
    """``G_D(gamma_i, gamma_j)`` for every path (rows of vertex indices), by batched solves."""
    op = walk_operator(D, spec)
    uniq, inv = np.unique(paths, return_inverse=True)
    inv = inv.reshape(paths.shape)
    N, L = paths.shape
    out = np.empty((N, L, L))
    for c0 in range(0, len(uniq), batch):
        cols = uniq[c0: c0 + batch]
        B = np.zeros((D.n, len(cols)))
        B[cols, np.arange(len(cols))] = 1.0
        X = op.system.solve(B)  # columns G(., u)
        sel = (inv >= c0) & (inv < c0 + len(cols))
        for j in range(L):
            rows = np.nonzero(sel[:, j])[0]
            if len(rows):
                out[rows, :, j] = X[paths[rows, :], (inv[rows, j] - c0)[:, None]]
    return out


def lambda_martingale_check(R: float, n_samples: int, sigma: int = 10, seed: int = 0, v=None,
                            spec: LatticeWalkSpec | None = None) -> dict:
    """Estimate ``E[M_sigma - M_0]`` for ``M_n = H_n(v, gamma_n) / H_n(0, gamma_n)``.

    ``gamma`` is the LERW from the boundary to 0. With ``S`` the first
    ``n - 1`` interior vertices of ``gamma``, ``M_n`` equals
    ``G_{D - S}(v, gamma_n) / G_{D - S}(0, gamma_n)``, evaluated exactly by
    the Schur complement of ``G_D`` on ``S``.
    """
    spec = spec or square_walk()
    D = build_disk_domain(R)
    v = np.asarray(v if v is not None else (int(round(R / 10)), 0), dtype=np.int64)
    iv, i0 = D.index_of(v), D.index_of((0, 0))
    g0 = green_row(D, (0, 0), spec)
    gv = green_row(D, v, spec)
    probs = dict(zip(map(tuple, spec.offsets.tolist()), spec.probs))
    paths, M0, hit_v = [], [], 0
    for k in range(n_samples):
        dec = sample_lerw_reversed(D, spec, make_rng(seed, k, STREAM_LERW))
        g = dec.gamma.vertices
        if len(g) < sigma + 2:
            raise RuntimeError("LERW shorter than sigma")
        idx = D.indices_of(g[1: sigma + 1])
        if np.any(idx == iv):
            hit_v += 1
            continue
        # M_0 through the last-exit decomposition at gamma_0
        outer = g[0]
        h0 = hv = 0.0
        for o, p in probs.items():
            y = D.index_of(outer - np.asarray(o))
            if y >= 0:
                h0 += g0[y] * p
                hv += gv[y] * p
        paths.append(idx)
        M0.append(hv / h0)
    if hit_v > 0.001 * n_samples:
        if sigma <= 1:
            return report(None, None, n_samples, "gamma hits v", None, "inconclusive", hits=hit_v)
        return lambda_martingale_check(R, n_samples, sigma // 2, seed, v, spec)
    P = np.array(paths)
    Gss = _local_green_values(D, spec, P)
    M = np.empty((len(P), sigma + 1))
    M[:, 0] = M0
    a0 = g0[P]
    av = gv[P]
    for n in range(1, sigma + 1):
        y = n - 1
        if n == 1:
            M[:, n] = av[:, y] / a0[:, y]
            continue
        S = slice(0, n - 1)
        GSS = Gss[:, S, S]
        GSy = Gss[:, S, y]
        sol = np.linalg.solve(GSS, GSy[..., None])[..., 0]
        num = av[:, y] - np.einsum("ij,ij->i", av[:, S], sol)
        den = a0[:, y] - np.einsum("ij,ij->i", a0[:, S], sol)
        M[:, n] = num / den
    d = M[:, sigma] - M[:, 0]
    est, se = float(d.mean()), float(d.std(ddof=1) / np.sqrt(len(d)))
    verdict = "pass" if abs(est) <= 3 * se else "fail"
    return report(est, se, len(d), "|E[M_sigma - M_0]| < 3 SE", None, verdict,
                  sigma=sigma, v=v.tolist(), mean_M0=float(np.mean(M0)), path_means=M.mean(axis=0).tolist())


def lambda_martingale_exact(D: GridDomain, v, gamma0, spec: LatticeWalkSpec | None = None) -> tuple:
    """``(M_0, E[M_1])`` by summing over the first interior vertex ``gamma_1``.

    ``gamma_1 = y`` has probability ``G_D(0, y) p(y, gamma_0) / H_D(0, gamma_0)``
    and then ``M_1 = G_D(v, y) / G_D(0, y)``.
    """
    spec = spec or square_walk()
    g0 = green_row(D, (0, 0), spec)
    gv = green_row(D, v, spec)
    gamma0 = np.asarray(gamma0)
    terms = []
    for o, p in zip(spec.offsets, spec.probs):
        y = D.index_of(gamma0 - o)
        if y >= 0:
            terms.append((y, p))
    h0 = sum(g0[y] * p for y, p in terms)
    hv = sum(gv[y] * p for y, p in terms)
    if h0 == 0:
        raise ValueError("gamma_0 is not reachable")
    M0 = hv / h0
    EM1 = sum((g0[y] * p / h0) * (gv[y] / g0[y]) for y, p in terms)
    return float(M0), float(EM1)


def pipeline_calibration(kappa: float, n_traces: int = 500, T: float = 1.0, dt: float = 0.01,
                         seed: int = 0) -> dict:
    """Recover ``kappa`` from the zipper applied to self-generated SLE(kappa) traces."""
    incs = []
    for k in range(n_traces):
        _, pts, _ = sle_trace(kappa, CHORDAL, T, dt, make_rng(seed, k, STREAM_SLE))
        rec, _ = extract_driving(pts, CHORDAL)
        incs.append(np.diff(rec.values) / np.sqrt(np.diff(rec.times)))
    x = np.concatenate(incs)
    est = float(x.var(ddof=1))
    se = float(est * np.sqrt(2 / (len(x) - 1)))
    ok = abs(est - kappa) <= 0.1 * kappa
    return report(est, se, n_traces, "kappa within 10%", None, "pass" if ok else "fail", kappa=kappa)


__all__ = [
    "KeyEstimateSample", "IncrementDataset", "lerw_key_estimate", "peano_key_estimate",
    "driving_convergence", "driving_samples", "increment_tests", "lambda_martingale_check",
    "lambda_martingale_exact", "pipeline_calibration", "mirrored_pair", "stopping_index",
    "halfplane_map", "radial_prefix", "overshoot_trend", "lerw_curve", "peano_curve_points", "report", "to_json", "with_rerun",
]
