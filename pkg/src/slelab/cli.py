"""Command line: ``slelab sample``, ``slelab verify`` and ``slelab bench``."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .rng import STREAM_LERW, STREAM_SLE, STREAM_UST, default_threads, make_rng, run_replicas

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 64

DEFAULTS = {
    "sample": {
        "lerw": {"radius": 100.0},
        "ust": {"width": 32, "height": 32},
        "peano": {"width": 64, "height": 32, "radius": None},
        "sle": {"kappa": 2.0, "mode": "chordal", "T": 1.0, "dt": 1e-3},
    },
    "verify": {
        "oracles": {},
        "wilson": {},
        "bijection": {"max_trees": 200},
        "loewner": {},
        "keyestimate": {"model": "lerw", "budget": "small"},
        "convergence": {"model": "lerw", "budget": "small"},
        "harmonic": {},
        "potential": {},
        "greens": {},
        "martingale": {"budget": "small"},
    },
}

KEY_BUDGETS = {"small": dict(R=200, delta=0.3, n=100), "full": dict(R=400, delta=0.3, n=400)}
MARTINGALE_BUDGETS = {"small": dict(R=40, n=5000, sigma=10), "full": dict(R=80, n=50_000, sigma=10)}


@dataclass
class ExperimentConfig:
    """Fully resolved run configuration; identical configs give identical JSON/CSV output."""

    experiment: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    out: str = "slelab_out"
    deterministic: bool = False
    threads: int = 1
    count: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls(**json.loads(text))


def resolve_config(command: str, kind: str, flags: dict, file_cfg: dict | None = None,
                   env=None) -> ExperimentConfig:
    """Merge defaults, a config file, ``SLELAB_SEED`` and command-line flags (in rising precedence)."""
    env = os.environ if env is None else env
    file_cfg = file_cfg or {}
    params = dict(DEFAULTS[command][kind])
    params.update(file_cfg.get("params", {}))
    top = {"seed": 0, "out": "slelab_out", "deterministic": False, "threads": default_threads(), "count": 1}
    top.update({k: v for k, v in file_cfg.items() if k in top})
    if "SLELAB_SEED" in env:
        top["seed"] = int(env["SLELAB_SEED"])
    for k, v in flags.items():
        if v is None:
            continue
        if k in top:
            top[k] = v
        else:
            params[k] = v
    return ExperimentConfig(f"{command}:{kind}", int(top["seed"]), params, str(top["out"]),
                            bool(top["deterministic"]), int(top["threads"]), int(top["count"]))


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _svg_stamp(cfg: ExperimentConfig) -> str:
    if cfg.deterministic:
        return ""
    return f"<!-- created {time.strftime('%Y-%m-%dT%H:%M:%S')} -->"


def polyline_svg(paths, size: float = 600.0, circle: float | None = None, stamp: str = "",
                 colors=("#c00000",), widths=(1.0,)) -> str:
    """Complex polylines on a square canvas; ``circle`` draws a centred circle of that radius."""
    allz = np.concatenate([np.asarray(p, dtype=complex) for p in paths])
    if circle is not None:
        allz = np.concatenate([allz, [circle, -circle, 1j * circle, -1j * circle]])
    x0, x1 = allz.real.min(), allz.real.max()
    y0, y1 = allz.imag.min(), allz.imag.max()
    span = max(x1 - x0, y1 - y0, 1e-12) * 1.05
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    X = lambda x: (x - cx) / span * size + size / 2
    Y = lambda y: size / 2 - (y - cy) / span * size
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}" '
           f'viewBox="0 0 {size:.0f} {size:.0f}">']
    if stamp:
        out.append(stamp)
    out.append('<rect width="100%" height="100%" fill="white"/>')
    if circle is not None:
        r = circle / span * size
        out.append(f'<circle cx="{X(0):.2f}" cy="{Y(0):.2f}" r="{r:.2f}" fill="none" stroke="#808080"/>')
    for k, p in enumerate(paths):
        p = np.asarray(p, dtype=complex)
        pts = " ".join(f"{X(z.real):.2f},{Y(z.imag):.2f}" for z in p)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colors[k % len(colors)]}" '
                   f'stroke-width="{widths[k % len(widths)]}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def segments_svg(segs, size: float = 600.0, stamp: str = "") -> str:
    """Line segments ``((x0, y0), (x1, y1))`` on a square canvas."""
    a = np.asarray(segs, dtype=float).reshape(-1, 4)
    lo = a.reshape(-1, 2).min(axis=0) - 1
    hi = a.reshape(-1, 2).max(axis=0) + 1
    s = size / max(hi - lo)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{(hi[0] - lo[0]) * s:.0f}" '
           f'height="{(hi[1] - lo[1]) * s:.0f}">']
    if stamp:
        out.append(stamp)
    out.append('<rect width="100%" height="100%" fill="white"/>')
    d = "".join(f"M{(x0 - lo[0]) * s:.2f},{(hi[1] - y0) * s:.2f}L{(x1 - lo[0]) * s:.2f},{(hi[1] - y1) * s:.2f}"
                for x0, y0, x1, y1 in a)
    out.append(f'<path d="{d}" stroke="black" stroke-width="1.5" fill="none"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# sample


def _suffix(cfg, k):
    return "" if cfg.count == 1 else f"_{k:04d}"


def sample_lerw(cfg: ExperimentConfig) -> list:
    from .lattice import build_disk_domain
    from .lerw import sample_lerw_reversed

    R = float(cfg.params["radius"])
    if not R >= 2:
        raise ValueError("radius must be at least 2")
    D = build_disk_domain(R)
    out = Path(cfg.out)

    def one(rng, k):
        dec = sample_lerw_reversed(D, None, rng)
        g = dec.gamma
        z = g.vertices[:, 0] + 1j * g.vertices[:, 1]
        sfx = _suffix(cfg, k)
        return [_write(out / f"lerw{sfx}.json", g.to_json()),
                _write(out / f"lerw{sfx}.svg", polyline_svg([z], circle=R, stamp=_svg_stamp(cfg)))]

    return sum(run_replicas(one, cfg.seed, cfg.count, STREAM_LERW, cfg.threads), [])


def _grid_graph(w: int, h: int):
    edges = []
    for x in range(w):
        for y in range(h):
            if x + 1 < w:
                edges.append(((x, y), (x + 1, y)))
            if y + 1 < h:
                edges.append(((x, y), (x, y + 1)))
    return edges


def sample_ust(cfg: ExperimentConfig) -> list:
    from .ust import UstSampler

    w, h = int(cfg.params["width"]), int(cfg.params["height"])
    if w < 1 or h < 1 or w * h < 2:
        raise ValueError("grid needs at least two vertices")
    S = UstSampler(_grid_graph(w, h), root=(0, 0))
    out = Path(cfg.out)
    ids = S.edge_ids(make_rng(cfg.seed, 0, STREAM_UST), cfg.count)
    files = []
    for k, row in enumerate(ids):
        T = S.tree(row)
        sfx = _suffix(cfg, k)
        files.append(_write(out / f"ust{sfx}.json", T.to_json()))
        files.append(_write(out / f"ust{sfx}.svg", segments_svg(sorted(T.edges), stamp=_svg_stamp(cfg))))
    return files


def sample_peano(cfg: ExperimentConfig) -> list:
    from .peano import dual_tree, peano_curve, peano_svg, sample_tree
    from .peano_config import disk_peano_config, rect_peano_config

    p = cfg.params
    if p.get("radius"):
        pc = disk_peano_config(float(p["radius"]))
    else:
        pc = rect_peano_config(int(p["width"]), int(p["height"]))
    out = Path(cfg.out)
    files = [_write(out / "peano_config.json", pc.to_json())]

    def one(rng, k):
        T = sample_tree(pc, rng)
        g = peano_curve(T, pc)
        sfx = _suffix(cfg, k)
        svg = peano_svg(pc, T, g)
        stamp = _svg_stamp(cfg)
        if stamp:
            svg = svg.replace(">", ">\n" + stamp, 1)
        return [_write(out / f"tree{sfx}.json", T.to_json()),
                _write(out / f"dual_tree{sfx}.json", dual_tree(T, pc).to_json()),
                _write(out / f"peano{sfx}.json", g.to_json()),
                _write(out / f"peano{sfx}.svg", svg)]

    return files + sum(run_replicas(one, cfg.seed, cfg.count, STREAM_UST, cfg.threads), [])


def sample_sle(cfg: ExperimentConfig) -> list:
    from .loewner import RADIAL, curve_to_csv, sle_trace

    p = cfg.params
    kappa, mode, T, dt = float(p["kappa"]), str(p["mode"]), float(p["T"]), float(p["dt"])
    if kappa < 0 or T <= 0 or dt <= 0 or mode not in ("chordal", "radial"):
        raise ValueError("need kappa >= 0, T > 0, dt > 0 and mode chordal or radial")
    out = Path(cfg.out)

    def one(rng, k):
        t, pts, rec = sle_trace(kappa, mode, T, dt, rng)
        sfx = _suffix(cfg, k)
        svg = polyline_svg([pts], circle=1.0 if mode == RADIAL else None, stamp=_svg_stamp(cfg))
        return [_write(out / f"sle_driving{sfx}.csv", rec.to_csv()),
                _write(out / f"sle_trace{sfx}.csv", curve_to_csv(t, pts)),
                _write(out / f"sle{sfx}.svg", svg)]

    return sum(run_replicas(one, cfg.seed, cfg.count, STREAM_SLE, cfg.threads), [])


SAMPLERS = {"lerw": sample_lerw, "ust": sample_ust, "peano": sample_peano, "sle": sample_sle}


# ---------------------------------------------------------------------------
# verify


def run_verify(cfg: ExperimentConfig) -> tuple:
    """Run the named suite; returns ``(report, exit code)``."""
    from . import suites
    from .observables import to_json

    name = cfg.experiment.split(":", 1)[1]
    p = dict(cfg.params)
    budget = p.pop("budget", "small")
    if name == "convergence":
        rep = suites.convergence_suite(p.get("model", "lerw"), budget, cfg.seed)
        data = rep.pop("dataset")
        _write(Path(cfg.out) / "increments.csv", data.to_csv())
    elif name == "keyestimate":
        b = KEY_BUDGETS[budget]
        rep = suites.keyestimate_suite(cfg.seed, b["R"], b["delta"], b["n"], model=p.get("model", "lerw"),
                                       scale=p.get("scale", 200))
    elif name == "martingale":
        rep = suites.martingale_suite(cfg.seed, **MARTINGALE_BUDGETS[budget])
    elif name == "bijection":
        rep = suites.bijection_suite(cfg.seed, max_trees=int(p.get("max_trees", 200)))
    elif name in ("harmonic", "potential"):
        rep = suites.SUITES[name]()
    else:
        rep = suites.SUITES[name](seed=cfg.seed)
    if cfg.deterministic:
        rep.pop("seconds", None)
    _write(Path(cfg.out) / f"verify_{name}.json", to_json(rep))
    code = {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[rep["verdict"]]
    return rep, code


# ---------------------------------------------------------------------------
# bench


def run_bench(cfg: ExperimentConfig) -> dict:
    """Wall-clock timings of the main samplers at moderate sizes."""
    from .lattice import build_disk_domain
    from .lerw import sample_lerw_reversed
    from .loewner import CHORDAL, extract_driving, sle_trace
    from .ust import UstSampler
    from .walks import sample_exit_counts

    R = float(cfg.params.get("radius", 200))
    rng = make_rng(cfg.seed, 0, 0)
    D = build_disk_domain(R)
    out = {}
    t = time.perf_counter()
    sample_exit_counts(D, (0, 0), 1000, None, rng)
    out["walk_exit_per_1000"] = time.perf_counter() - t
    t = time.perf_counter()
    for _ in range(10):
        sample_lerw_reversed(D, None, rng)
    out["lerw_per_sample"] = (time.perf_counter() - t) / 10
    S = UstSampler(_grid_graph(100, 100))
    t = time.perf_counter()
    S.edge_ids(rng, 10)
    out["ust_100x100_per_sample"] = (time.perf_counter() - t) / 10
    _, pts, _ = sle_trace(2.0, CHORDAL, 1.0, 1e-3, rng)
    t = time.perf_counter()
    extract_driving(pts, CHORDAL)
    out["zipper_1000_points"] = time.perf_counter() - t
    out["radius"] = R
    _write(Path(cfg.out) / "bench.json", json.dumps(out, indent=2, sort_keys=True))
    return out


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with ``EXIT_USAGE`` so that 2 stays reserved for inconclusive verdicts."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags take precedence)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads (default: available cores)")
    common.add_argument("--deterministic", action="store_true", default=None,
                        help="suppress timestamps and timings in outputs")

    ap = _Parser(prog="slelab", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="draw samples and write JSON/CSV plus SVG")
    ssub = sp.add_subparsers(dest="kind", required=True)
    p = ssub.add_parser("lerw", parents=[common])
    p.add_argument("--radius", type=float)
    p.add_argument("--count", type=int)
    p = ssub.add_parser("ust", parents=[common])
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--count", type=int)
    p = ssub.add_parser("peano", parents=[common])
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--radius", type=float, help="disk configuration instead of a rectangle")
    p.add_argument("--count", type=int)
    p = ssub.add_parser("sle", parents=[common])
    p.add_argument("--kappa", type=float)
    p.add_argument("--mode", choices=["chordal", "radial"])
    p.add_argument("--T", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--count", type=int)

    vp = sub.add_parser("verify", parents=[common], help="run a verification suite")
    vp.add_argument("suite", choices=sorted(DEFAULTS["verify"]))
    vp.add_argument("--budget", choices=["small", "full"])
    vp.add_argument("--model", choices=["lerw", "peano", "sle"])
    vp.add_argument("--max-trees", dest="max_trees", type=int)

    bp = sub.add_parser("bench", parents=[common], help="time the main samplers")
    bp.add_argument("--radius", type=float)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    flags = dict(vars(args))
    command = flags.pop("command")
    kind = flags.pop("kind", None) or flags.pop("suite", None) or "bench"
    flags.pop("suite", None)
    cfile = flags.pop("config", None)
    file_cfg = json.loads(Path(cfile).read_text()) if cfile else {}
    if command == "bench":
        DEFAULTS.setdefault("bench", {"bench": {"radius": 200.0}})
    try:
        cfg = resolve_config(command, kind, flags, file_cfg)
    except (KeyError, ValueError) as e:
        ap.error(str(e))
    _write(Path(cfg.out) / "config.json", cfg.to_json())
    try:
        if command == "sample":
            files = SAMPLERS[kind](cfg)
            for f in files:
                print(f)
            return EXIT_OK
        if command == "verify":
            rep, code = run_verify(cfg)
            for c in rep["checks"]:
                print(f"{c['verdict'].upper():12s} {c['name']}")
            print(f"{rep['suite']}: {rep['verdict']} -> {Path(cfg.out) / ('verify_' + rep['suite'] + '.json')}")
            return code
        res = run_bench(cfg)
        for k, v in sorted(res.items()):
            print(f"{k:28s} {v:.4g}")
        return EXIT_OK
    except ValueError as e:
        print(f"slelab: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
