import json
from pathlib import Path

import pytest

from slelab import cli, suites


def run(*args):
    return cli.main([str(a) for a in args])


def _files(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_sample_lerw(tmp_path):
    assert run("sample", "lerw", "--radius", 20, "--seed", 1, "--out", tmp_path) == 0
    names = set(_files(tmp_path))
    assert {"lerw.json", "lerw.svg", "config.json"} <= names
    path = json.loads((tmp_path / "lerw.json").read_text())
    assert path
    assert (tmp_path / "lerw.svg").read_text().lstrip().startswith("<svg")


def test_sample_sle_radial(tmp_path):
    assert run("sample", "sle", "--kappa", 2, "--mode", "radial", "--T", 0.3, "--dt", 0.01, "--out", tmp_path) == 0
    names = set(_files(tmp_path))
    assert {"sle_driving.csv", "sle_trace.csv", "sle.svg"} <= names
    assert (tmp_path / "sle_driving.csv").read_text().startswith("t,value")


def test_sample_peano(tmp_path):
    assert run("sample", "peano", "--width", 16, "--height", 8, "--out", tmp_path) == 0
    names = set(_files(tmp_path))
    assert {"peano_config.json", "tree.json", "dual_tree.json", "peano.json", "peano.svg"} <= names


def test_sample_ust_count(tmp_path):
    assert run("sample", "ust", "--width", 5, "--height", 4, "--count", 3, "--out", tmp_path) == 0
    names = set(_files(tmp_path))
    assert {"ust_0000.json", "ust_0001.json", "ust_0002.json", "ust_0002.svg"} <= names


@pytest.mark.parametrize("kind,extra", [("lerw", ["--radius", 15]), ("peano", ["--width", 12, "--height", 8]),
                                        ("sle", ["--T", 0.2, "--dt", 0.01]), ("ust", ["--width", 6, "--height", 6])])
def test_deterministic_outputs(tmp_path, kind, extra):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("sample", kind, *extra, "--seed", 9, "--deterministic", "--out", d) == 0
    fa, fb = _files(a), _files(b)
    fa.pop("config.json")
    fb.pop("config.json")
    assert fa == fb


def test_rerun_from_config_file(tmp_path):
    a = tmp_path / "a"
    assert run("sample", "lerw", "--radius", 12, "--seed", 4, "--deterministic", "--out", a) == 0
    cfg = json.loads((a / "config.json").read_text())
    cfg["out"] = str(tmp_path / "b")
    cfile = tmp_path / "cfg.json"
    cfile.write_text(json.dumps(cfg))
    assert run("sample", "lerw", "--config", cfile) == 0
    assert (a / "lerw.json").read_bytes() == (tmp_path / "b" / "lerw.json").read_bytes()


def test_timestamp_only_without_deterministic(tmp_path):
    assert run("sample", "lerw", "--radius", 12, "--out", tmp_path) == 0
    assert "created" in (tmp_path / "lerw.svg").read_text()
    assert run("sample", "lerw", "--radius", 12, "--deterministic", "--out", tmp_path / "d") == 0
    assert "created" not in (tmp_path / "d" / "lerw.svg").read_text()


def test_config_precedence():
    file_cfg = {"seed": 5, "params": {"radius": 50.0}}
    cfg = cli.resolve_config("sample", "lerw", {"seed": None, "radius": None}, file_cfg, env={})
    assert cfg.seed == 5 and cfg.params["radius"] == 50.0
    cfg = cli.resolve_config("sample", "lerw", {"seed": None}, file_cfg, env={"SLELAB_SEED": "11"})
    assert cfg.seed == 11
    cfg = cli.resolve_config("sample", "lerw", {"seed": 3, "radius": 70.0}, file_cfg, env={"SLELAB_SEED": "11"})
    assert cfg.seed == 3 and cfg.params["radius"] == 70.0
    cfg = cli.resolve_config("sample", "lerw", {}, None, env={})
    assert cfg.seed == 0 and cfg.params["radius"] == 100.0


def test_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("SLELAB_SEED", "17")
    assert run("sample", "sle", "--T", 0.1, "--dt", 0.01, "--out", tmp_path) == 0
    assert json.loads((tmp_path / "config.json").read_text())["seed"] == 17


def test_config_json_roundtrip():
    cfg = cli.resolve_config("sample", "sle", {"kappa": 4.0}, None, env={})
    assert cli.ExperimentConfig.from_json(cfg.to_json()) == cfg


def test_verify_bijection(tmp_path):
    assert run("verify", "bijection", "--max-trees", 200, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "verify_bijection.json").read_text())
    assert rep["verdict"] == "pass"


def test_verify_wilson_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run("verify", "wilson", "--deterministic", "--out", tmp_path / d) == 0
    assert (tmp_path / "a" / "verify_wilson.json").read_bytes() == (tmp_path / "b" / "verify_wilson.json").read_bytes()


@pytest.mark.parametrize("verdict,code", [("fail", 1), ("inconclusive", 2)])
def test_verify_exit_codes(tmp_path, monkeypatch, verdict, code):
    fake = lambda seed=0: {"suite": "wilson", "verdict": verdict, "checks": [{"name": "x", "verdict": verdict}]}
    monkeypatch.setitem(suites.SUITES, "wilson", fake)
    assert run("verify", "wilson", "--out", tmp_path) == code


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as e:
        run("verify", "nonsense")
    assert e.value.code == cli.EXIT_USAGE
    assert run("sample", "lerw", "--radius", 1, "--out", tmp_path) == cli.EXIT_USAGE
    assert run("sample", "ust", "--width", 1, "--height", 1, "--out", tmp_path) == cli.EXIT_USAGE


def test_bench(tmp_path):
    assert run("bench", "--radius", 30, "--out", tmp_path) == 0
    res = json.loads((tmp_path / "bench.json").read_text())
    assert res["radius"] == 30 and res["lerw_per_sample"] > 0
