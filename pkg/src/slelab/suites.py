"""Verification suites shared by the command line and the acceptance tests.

Every suite returns ``{"suite", "checks", "verdict", "seconds"}``. A check is a
dict with ``name``, ``value``, ``bound`` and ``verdict`` (``pass``, ``fail`` or
``inconclusive``).
"""
from __future__ import annotations

import time
from collections import Counter

import numpy as np
from scipy import stats

from .harmonic import (disk_three_arc_problem, harmonic_conjugate, hitting_vs_lambda_max,
                       rectangle_problem, solve_mixed)
from .lattice import build_disk_domain, square_walk
from .lerw import step_law_check
from .loewner import CHORDAL, DrivingRecord, extract_driving, sle_trace
from .observables import (driving_convergence, lambda_martingale_check, lerw_key_estimate,
                          peano_key_estimate, pipeline_calibration)
from .peano import (_tree_from_ids, enumerate_peano_paths, enumerate_trees, peano_curve, reverse_peano,
                    sample_tree_ids, tree_from_peano, wired_graph)
from .peano_config import rect_peano_config
from .rng import STREAM_DOMAIN, STREAM_LERW, STREAM_SLE, STREAM_UST, STREAM_WALK, make_rng
from .ust import UstSampler, enumerate_arborescences, wilson_arborescence
from .walks import admissible_green, exact_green, exact_hitting, green_row, potential_kernel_table, \
    check_aG_identity, sample_exit_counts

Z_BOUND = 4.0


def check(name: str, value, bound, ok, **extra) -> dict:
    if ok is None:
        verdict = "inconclusive"
    else:
        verdict = "pass" if ok else "fail"
    out = {"name": name, "value": value, "bound": bound, "verdict": verdict}
    out.update(extra)
    return out


def _finish(name: str, checks: list, t0: float) -> dict:
    verdicts = {c["verdict"] for c in checks}
    if "fail" in verdicts:
        v = "fail"
    elif "inconclusive" in verdicts:
        v = "inconclusive"
    else:
        v = "pass"
    return {"suite": name, "checks": checks, "verdict": v, "seconds": time.perf_counter() - t0}


def _max_z(freq, p, n) -> float:
    se = np.sqrt(np.maximum(p * (1 - p), 1e-300) / n)
    return float(np.max(np.abs(freq - p) / se))


# ---------------------------------------------------------------------------


def oracle_suite(seed: int = 0, n: int = 100_000, radius: float = 10.0) -> dict:
    """Monte Carlo exit laws, Green's functions and conditioned first steps against linear solves."""
    t0 = time.perf_counter()
    spec = square_walk()
    D = build_disk_domain(radius)
    checks = []
    # exit distribution from two starts
    for k, start in enumerate([(0, 0), (3, -2)]):
        H = exact_hitting(D, start, spec)
        counts, visits = sample_exit_counts(D, start, n, spec, make_rng(seed, k, STREAM_WALK))
        z = _max_z(counts / n, H, n)
        checks.append(check(f"exit law from {start}", z, Z_BOUND, z < Z_BOUND))
        # Green's function: E N_v = G(s, v), E N_v^2 = G(s, v) (2 G(v, v) - 1)
        g = green_row(D, start, spec)
        near = np.nonzero(np.abs(D.interior - np.asarray(start)).sum(axis=1) <= 3)[0]
        gvv = np.array([exact_green(D, D.interior[i], D.interior[i], spec) for i in near])
        var = g[near] * (2 * gvv - 1) - g[near] ** 2
        zg = float(np.max(np.abs(visits[near] / n - g[near]) / np.sqrt(var / n)))
        checks.append(check(f"Green's function near {start}", zg, Z_BOUND, zg < Z_BOUND))
    # conditioned first step for several exit pairs
    pairs = D.boundary_pairs
    ang = np.arctan2(pairs[:, 3], pairs[:, 2])
    for j, target in enumerate([0.0, 2.0, -2.5]):
        k = int(np.argmin(np.abs(np.angle(np.exp(1j * (ang - target))))))
        res = step_law_check(D, spec, k, n, make_rng(seed, j, STREAM_LERW))
        z = float(np.max(np.abs(res["z"])))
        checks.append(check(f"conditioned first step, exit {pairs[k].tolist()}", z, Z_BOUND, z < Z_BOUND))
    # row sums
    starts = D.interior[:: max(1, D.n // 50)]
    err = max(abs(exact_hitting(D, s, spec).sum() - 1.0) for s in starts)
    checks.append(check("hitting rows sum to 1", float(err), 1e-10, err < 1e-10))
    checks.append(check("domain size", int(D.n), 5000, D.n <= 5000))
    return _finish("oracles", checks, t0)


def wilson_suite(seed: int = 0, n: int = 40_000) -> dict:
    """Cycle, weighted triangle and directed three-cycle frequencies."""
    t0 = time.perf_counter()
    checks = []
    c4 = [(0, 1), (1, 2), (2, 3), (3, 0)]
    ids = UstSampler(c4).edge_ids(make_rng(seed, 0, STREAM_UST), n)
    missing = np.array([(set(range(4)) - set(r.tolist())).pop() for r in ids])
    freq = np.bincount(missing, minlength=4) / n
    z = _max_z(freq, np.full(4, 0.25), n)
    checks.append(check("C4 uniform trees", z, Z_BOUND, z < Z_BOUND, freq=freq.tolist()))
    tri = [(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0)]
    ids = UstSampler(tri).edge_ids(make_rng(seed, 1, STREAM_UST), n)
    missing = np.array([(set(range(3)) - set(r.tolist())).pop() for r in ids])
    w = np.array([1.0, 2.0, 3.0])
    prod = np.array([w[1] * w[2], w[0] * w[2], w[0] * w[1]])
    p = prod / prod.sum()
    freq = np.bincount(missing, minlength=3) / n
    z = _max_z(freq, p, n)
    checks.append(check("weighted triangle product law", z, Z_BOUND, z < Z_BOUND,
                        freq=freq.tolist(), expected=p.tolist()))
    P = np.array([[0.0, 0.8, 0.2], [0.3, 0.0, 0.7], [0.6, 0.4, 0.0]])
    arbs = enumerate_arborescences(P, 0)
    keys = [tuple(a) for a, _ in arbs]
    wts = np.array([x for _, x in arbs])
    pe = wts / wts.sum()
    par = wilson_arborescence(P, 0, make_rng(seed, 2, STREAM_UST), n_samples=n)
    cnt = Counter(map(tuple, par.tolist()))
    freq = np.array([cnt.get(k, 0) for k in keys]) / n
    z = _max_z(freq, pe, n)
    ok = z < Z_BOUND and sum(cnt.values()) == sum(cnt.get(k, 0) for k in keys)
    checks.append(check("directed 3-cycle arborescences", z, Z_BOUND, ok,
                        freq=freq.tolist(), expected=pe.tolist()))
    return _finish("wilson", checks, t0)


def bijection_suite(seed: int = 0, max_trees: int = 200, n_samples: int = 20_000) -> dict:
    """Exhaustive tree/curve bijection, inverse and reversal on a small configuration."""
    t0 = time.perf_counter()
    cfg = rect_peano_config(2, 2, min_scale=1)
    trees = enumerate_trees(cfg, limit=max_trees + 1)
    checks = [check("tree count", len(trees), max_trees, len(trees) <= max_trees)]
    paths = [peano_curve(T, cfg) for T in trees]
    all_paths = enumerate_peano_paths(cfg)
    checks.append(check("injective", len(set(paths)), len(trees), len(set(paths)) == len(trees)))
    checks.append(check("surjective onto Peano paths", len(all_paths), len(trees),
                        set(all_paths) == set(paths)))
    inv_ok = all(tree_from_peano(g, cfg).edges == T.edges for g, T in zip(paths, trees))
    inv_ok &= all(peano_curve(tree_from_peano(g, cfg), cfg) == g for g in all_paths)
    checks.append(check("tree_from_peano two-sided inverse", inv_ok, True, inv_ok))
    rev = [reverse_peano(g, cfg) for g in paths]
    sw = rev[0][1]
    sw_paths = set(enumerate_peano_paths(sw))
    onto = {r for r, _ in rev} == sw_paths and len(sw_paths) == len(paths)
    checks.append(check("reversal onto swapped configuration", onto, True, onto))
    invol = all(reverse_peano(r, s)[0] == g for (r, s), g in zip(rev, paths))
    checks.append(check("reversal is an involution", invol, True, invol))
    # pushforward of Wilson samples under reversal is uniform on the swapped paths
    G = wired_graph(cfg)
    ids = sample_tree_ids(cfg, make_rng(seed, 0, STREAM_UST), n_samples)
    keyed = {T.edges: k for k, T in enumerate(trees)}
    idx = [keyed[_tree_from_ids(cfg, G, r).edges] for r in ids]
    sw_index = {p: k for k, p in enumerate(sorted(sw_paths, key=lambda q: q.vertices.tobytes()))}
    counts = np.bincount([sw_index[rev[i][0]] for i in idx], minlength=len(sw_index))
    p_val = float(stats.chisquare(counts).pvalue)
    checks.append(check("reversal preserves the uniform measure", p_val, 0.001, p_val > 0.001))
    return _finish("bijection", checks, t0)


def loewner_suite(seed: int = 0, n_traces: int = 500) -> dict:
    """Zipper roundtrip, slit capacity, deterministic trace and kappa recovery."""
    t0 = time.perf_counter()
    checks = []
    rng = make_rng(seed, 0, STREAM_SLE)
    dts = rng.uniform(0.5, 1.5, 100) * 1e-3
    W = np.concatenate([[0.0], np.cumsum(rng.normal(0, 1, 100) * np.sqrt(2 * dts))])
    rec = DrivingRecord(CHORDAL, np.concatenate([[0.0], np.cumsum(dts)]), W)
    tips = rec.chain().tips()
    back, _ = extract_driving(np.concatenate([[complex(W[0])], tips]), CHORDAL)
    err = float(max(np.max(np.abs(back.values - rec.values)), np.max(np.abs(back.times - rec.times))))
    checks.append(check("chordal zipper roundtrip (100 steps)", err, 1e-6, err < 1e-6))
    h = 0.7
    slit, _ = extract_driving(1j * h * np.linspace(0, 1, 101), CHORDAL)
    err = abs(slit.times[-1] - h * h / 4)
    checks.append(check("vertical slit capacity h^2/4", float(err), 1e-6, err < 1e-6))
    t, pts, _ = sle_trace(0.0, CHORDAL, 1.0, 0.01, make_rng(seed, 1, STREAM_SLE))
    err = float(np.max(np.abs(pts - 2j * np.sqrt(t))))
    checks.append(check("kappa = 0 trace is 2i sqrt(t)", err, 1e-6, err < 1e-6))
    for kappa in (2.0, 8.0):
        rep = pipeline_calibration(kappa, n_traces, seed=seed)
        rel = abs(rep["estimate"] - kappa) / kappa
        checks.append(check(f"kappa = {kappa:g} recovered", rep["estimate"], 0.1 * kappa, rel <= 0.1))
    return _finish("loewner", checks, t0)


def keyestimate_suite(seed: int = 0, R: float = 400, delta: float = 0.3, n: int = 400,
                      model: str = "lerw", scale: float = 200) -> dict:
    """Stopped driving moments for the LERW (or Peano) key estimate."""
    t0 = time.perf_counter()
    if model == "lerw":
        rep = lerw_key_estimate(R, delta, n, seed)
        second = "second_moment_minus_2t"
    else:
        rep = peano_key_estimate(scale, delta, n, seed)
        second = "second_moment_minus_8t"
    bound = rep["bound"]
    inc = rep["verdict"] == "inconclusive"
    checks = []
    for key in ("mean_delta", second):
        est, se = rep["estimate"][key], rep["stderr"][key]
        lim = max(3 * se, bound)
        checks.append(check(key, est, lim, None if inc else abs(est) < lim, stderr=se, n=rep["n"],
                            dropped=rep["dropped"]))
    out = _finish("keyestimate", checks, t0)
    out["report"] = {k: v for k, v in rep.items() if k != "samples"}
    return out


CONVERGENCE_BUDGETS = {
    "lerw": {"small": dict(scale=100, T=0.2, n=200), "full": dict(scale=300, T=0.2, n=1000)},
    "peano": {"small": dict(scale=60, T=0.1, n=200), "full": dict(scale=200, T=0.1, n=600)},
    "sle": {"small": dict(scale=1000, T=0.2, n=200), "full": dict(scale=1000, T=0.2, n=1000)},
}


def convergence_suite(model: str = "lerw", budget: str = "small", seed: int = 0) -> dict:
    """Driving process against Brownian motion at the model's speed."""
    t0 = time.perf_counter()
    kappa = {"lerw": 2.0, "peano": 8.0, "sle": 2.0}[model]
    b = CONVERGENCE_BUDGETS[model][budget]
    band = {"sle": (1.8, 2.2)}.get(model)
    rep = driving_convergence(model, kappa, b["scale"], b["T"], b["n"], seed, band=band)
    inc = rep["verdict"] == "inconclusive"
    v = lambda ok: None if inc else ok
    checks = [
        check("Var(W(T))/T", rep["var_ratio"], rep["band"], v(rep["var_ok"])),
        check("increment means within 3 SE", rep["means"], rep["mean_se"], v(rep["means_ok"])),
        check("disjoint increment correlation", rep["rho"], rep["rho_bound"], v(rep["rho_ok"])),
        check("normality of increments (KS, level 0.001)", rep["p_value"], 0.001, v(rep["normality_ok"])),
    ]
    out = _finish("convergence", checks, t0)
    data = rep.pop("dataset")
    out["report"] = rep
    out["dataset"] = data
    return out


def harmonic_suite(R_values=(100, 200), bounds=(0.1, 0.05), disk_R: float = 60) -> dict:
    """Exit laws against the Poisson-kernel ratio, mixed problems and conjugates."""
    t0 = time.perf_counter()
    checks = []
    for R, b in zip(R_values, bounds):
        d = hitting_vs_lambda_max(R)
        checks.append(check(f"hitting vs lambda, R={R}", d, b, d < b))
    prob, exact = disk_three_arc_problem(disk_R, 0.0, np.pi / 3, np.pi)
    table = solve_mixed(prob)
    err = abs(table((0, 0)) - exact)
    checks.append(check(f"three-arc disk h(0), R={disk_R}", table((0, 0)), exact, err < 0.05, error=err))
    for name, p in (("rectangle", rectangle_problem(20, 30)), ("three-arc disk", prob)):
        tab = table if p is prob else solve_mixed(p)
        res = harmonic_conjugate(tab).residual
        checks.append(check(f"Cauchy-Riemann residual, {name}", res, 1e-9, res < 1e-9))
    return _finish("harmonic", checks, t0)


def potential_suite(box_radius: int = 160, disk_R: float = 20) -> dict:
    """Potential kernel value, logarithmic fit stability and the a-G identity."""
    t0 = time.perf_counter()
    K = potential_kernel_table(None, box_radius)
    a10 = float(K((1, 0)))
    checks = [check("a(1, 0)", a10, 0.01, abs(a10 - 1) <= 0.01)]
    fits = [K.fit(r0, r0 + 10)[0] for r0 in (20, 25, 30)]
    spread = (max(fits) - min(fits)) / np.mean(fits)
    checks.append(check("c1 stable over |z| in [20, 40]", float(spread), 0.01, spread < 0.01, fits=fits,
                        reference=2 / np.pi))
    D = build_disk_domain(disk_R)
    pts = [(0, 0), (5, 3), (-7, 2), (10, -10), (0, 15)]
    res = max(check_aG_identity(D, z, w) for z in pts for w in pts[:3])
    checks.append(check(f"a-G identity, disk radius {disk_R:g}", res, 0.02, res < 0.02))
    return _finish("potential", checks, t0)


GREEN_BAND = 50.0


def green_bounds_suite(seed: int = 0, n_domains: int = 50, C: float = GREEN_BAND) -> dict:
    """``G_D(0, v)`` for admissible ``v`` over random disks stays in ``[1/C, C]``."""
    t0 = time.perf_counter()
    rng = make_rng(seed, 0, STREAM_DOMAIN)
    lo, hi = np.inf, 0.0
    for _ in range(n_domains):
        R = rng.uniform(20, 80)
        c = 0.5 * R * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        D = build_disk_domain(R, center=c)
        _, g = admissible_green(D)
        lo, hi = min(lo, g.min()), max(hi, g.max())
    ok = lo >= 1 / C and hi <= C
    return _finish("greens", [check("G_D(0, v) in [1/C, C]", [float(lo), float(hi)], [1 / C, C], ok)], t0)


def martingale_suite(seed: int = 0, R: float = 80, n: int = 50_000, sigma: int = 10) -> dict:
    """Drift of the ratio martingale along the loop-erased walk."""
    t0 = time.perf_counter()
    rep = lambda_martingale_check(R, n, sigma, seed)
    ok = None if rep["verdict"] == "inconclusive" else rep["verdict"] == "pass"
    c = check("|E[M_sigma - M_0]| < 3 SE", rep["estimate"], 3 * rep["stderr"] if rep["stderr"] else None, ok,
              sigma=rep.get("sigma"))
    return _finish("martingale", [c], t0)


SUITES = {
    "oracles": oracle_suite,
    "wilson": wilson_suite,
    "bijection": bijection_suite,
    "loewner": loewner_suite,
    "keyestimate": keyestimate_suite,
    "convergence": convergence_suite,
    "harmonic": harmonic_suite,
    "potential": potential_suite,
    "greens": green_bounds_suite,
    "martingale": martingale_suite,
}
