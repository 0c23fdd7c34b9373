from __future__ import annotations

import json

import pytest

from morrey.cli import ConfigError, RunConfig, main

TINY = {"grid": {"n": 2, "L": 2.0, "h": 0.125, "p": 4.0}, "corpus": {"count": 3}}


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(dict(TINY, output_dir=str(tmp_path / "out"))))
    return path


def test_solve_verify_figures(cfg_path, tmp_path, capsys):
    assert main(["solve", "--config", str(cfg_path)]) == 0
    out = tmp_path / "out"
    meta = json.loads((out / "solution.json").read_text())
    for key in ("energy", "seminorm", "sharp_constant", "source_strength", "iterations",
                "converged"):
        assert key in meta
    assert main(["verify", "--config", str(cfg_path)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"]
    assert "PASS antisymmetry" in capsys.readouterr().out
    assert main(["figures", "--config", str(cfg_path)]) == 0
    assert (out / "slices.csv").read_text().startswith("a,y,value\n")
    assert (out / "spheres.csv").read_text().startswith("t,theta,value\n")


def test_outputs_are_deterministic(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", str(cfg_path), "--out", str(a)]) == 0
    assert main(["solve", "--config", str(cfg_path), "--out", str(b)]) == 0
    for name in ("field.csv", "solution.json", "grid.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_solve_flags_override_config(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--config", str(cfg_path), "--out", str(out), "--h", "0.25",
                 "--tol", "1e-6"]) == 0
    assert json.loads((out / "grid.json").read_text())["h"] == 0.25


def test_nonconverged_solve_exits_1(cfg_path, tmp_path):
    assert main(["solve", "--config", str(cfg_path), "--out", str(tmp_path / "x"),
                 "--max-iters", "1"]) == 1


def test_symmetrize(cfg_path, tmp_path):
    out = tmp_path / "out"
    main(["solve", "--config", str(cfg_path)])
    for op, extra in (("axial_average", []), ("axial_sweep", ["--zeta", "1"]),
                      ("positive_part", []), ("cap_rearrange", [])):
        assert main(["symmetrize", "--field", str(out / "field.csv"), "--operator", op,
                     "--out", str(tmp_path / "sym")] + extra) == 0
    assert (tmp_path / "sym" / "cap_rearranged.csv").exists()
    assert main(["symmetrize", "--field", str(out / "field.csv"), "--operator", "axial_sweep",
                 "--out", str(tmp_path / "sym")]) == 2


def test_sweep(cfg_path, tmp_path):
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    data = json.loads((tmp_path / "out" / "sweep.json").read_text())
    assert data["passed"] and data["results"]["polya_szego_axial"]["count"] == 3


@pytest.mark.parametrize("bad", [{"bogus": 1}, {"grid": {"q": 1}}, {"solver": {"tol": 1}},
                                 {"checks": {"enabled": ["nope"]}}, {"grid": {"h": 0.3}}])
def test_bad_config_exits_2(tmp_path, bad, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["solve", "--config", str(path)]) == 2
    assert "error" in capsys.readouterr().err


def test_malformed_and_missing_files(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["solve", "--config", str(path)]) == 2
    assert main(["verify", "--solution", str(tmp_path / "missing"),
                 "--out", str(tmp_path)]) == 2


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_runconfig_round_trip():
    cfg = RunConfig.from_dict(TINY)
    assert RunConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"corpus": {"size": 3}})
