import json
import os
import subprocess
import sys

import numpy as np
import pytest

from rotstar.cli import loglog_slope, run
from rotstar.grid import load_field


def read(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def solve_dirs(tmp_path_factory):
    base = tmp_path_factory.mktemp("solves")
    dirs = {}
    for n in (33, 65):
        d = base / f"n{n}"
        assert run(["solve", "--grid-n", str(n), "--out", str(d)]) == 0
        dirs[n] = d
    return dirs


def test_lane_emden_command(tmp_path, capsys):
    assert run(["lane-emden", "--n-index", "1", "--out", str(tmp_path)]) == 0
    rep = read(tmp_path / "report.json")
    assert rep["xi1"] == pytest.approx(np.pi, abs=1e-8)
    data = np.loadtxt(tmp_path / "theta.csv", delimiter=",", skiprows=1)
    assert data[0, 1] == 1.0 and abs(data[-1, 1]) < 1e-8
    man = read(tmp_path / "manifest.json")
    assert man["subcommand"] == "lane-emden" and set(man["artifacts"]) >= {"theta.csv", "report.json"}
    assert json.loads(capsys.readouterr().out)["command"] == "lane-emden"


def test_solve_artifacts(solve_dirs):
    d = solve_dirs[65]
    for name in ("w", "Y", "X", "V", "Fp", "Kp", "Ap", "Pi", "u"):
        assert (d / "fields" / f"{name}.csv").exists()
    for name in ("report.json", "timings.json", "config.yaml", "surface.json", "surface.csv", "xi1_curve.json",
                 "manifest.json"):
        assert (d / name).exists(), name
    rep = read(d / "report.json")
    assert rep["outer_ratio"] < 1 and rep["inner_ratio"] < 1
    assert rep["surface"]["physical_vacuum"] and rep["surface"]["oblate"]
    assert rep["B1_min"] > 0 and not rep["errors"]
    assert "timings" not in rep
    man = read(d / "manifest.json")
    assert "timings.json" in man["volatile"] and "timings.json" not in man["artifacts"]


def test_solve_is_reproducible(solve_dirs, tmp_path):
    assert run(["solve", "--grid-n", "65", "--out", str(tmp_path)]) == 0
    ref = solve_dirs[65]
    assert (tmp_path / "report.json").read_bytes() == (ref / "report.json").read_bytes()
    a, b = read(tmp_path / "manifest.json"), read(ref / "manifest.json")
    # config.yaml records the output directory, which the config hash leaves out
    assert a["config_hash"] == b["config_hash"]
    a["artifacts"].pop("config.yaml")
    b["artifacts"].pop("config.yaml")
    assert a["artifacts"] == b["artifacts"]


def test_binary_fields(tmp_path):
    assert run(["distorted", "--grid-n", "33", "--format", "bin", "--out", str(tmp_path)]) == 0
    f = load_field(tmp_path / "fields" / "Theta.bin")
    assert f.values[0, 0] == pytest.approx(1.0)
    assert read(tmp_path / "report.json")["xi1_curve"]["Xi1"][0] > read(tmp_path / "report.json")["xi1"]


def test_verify_and_slopes(solve_dirs, tmp_path):
    dirs = [str(solve_dirs[33]), str(solve_dirs[65])]
    assert run(["verify", *dirs, "--out", str(tmp_path)]) == 0
    summary = read(tmp_path / "verify.json")
    assert summary["slopes"][0]["grids"] == [33, 65]
    rep = read(solve_dirs[65] / "residuals.json")
    assert rep["identity_37"] < 1e-10 and rep["identity_w33"] < 1e-10
    assert rep["bernoulli_defect"] < 1e-12
    assert (solve_dirs[65] / "residuals" / "einstein_00.csv").exists()


def test_export_matches_fields(solve_dirs):
    d = solve_dirs[65]
    assert run(["export", str(d), "--lines", "equator", "axis", "rays", "--n-rays", "3"]) == 0
    eq = np.loadtxt(d / "profile_equator.csv", delimiter=",", skiprows=1)
    u = load_field(d / "fields" / "u.csv")
    # the first sample sits on the origin node
    assert eq[0, 2] == pytest.approx(u.values[0, 0], abs=1e-12)
    assert eq[0, 6] == pytest.approx(1.0, abs=1e-6)  # Pi / varpi on the axis
    rays = np.loadtxt(d / "profile_rays.csv", delimiter=",", skiprows=1)
    assert sorted(set(rays[:, 0])) == [0.0, 0.5, 1.0]


def test_sweep_and_tov_commands(tmp_path):
    out = tmp_path / "sweep"
    assert run(["sweep", "--grid-n", "33", "--taus", "1e-2", "1e-3", "--out", str(out)]) == 0
    s = read(out / "sweep.json")["tau"]
    assert len(s["rows"]) == 2 and s["spread"]["sup_w"] < 1.5
    assert (out / "sweep_tau.csv").exists()
    out = tmp_path / "tov"
    assert run(["tov-compare", "--grids", "33", "65", "--out", str(out)]) == 0
    t = read(out / "tov.json")
    assert t["slope"] == pytest.approx(2.0, abs=0.3)
    assert t["richardson"][0]["sup_diff"] < t["runs"][1]["sup_diff"]


@pytest.mark.parametrize("argv,code", [
    (["solve", "--tau", "0.5"], 2),
    (["solve", "--b", "0.2"], 2),
    (["lane-emden", "--n-index", "5"], 2),
    (["solve", "--grid-n", "64"], 2),
])
def test_configuration_errors_exit_2(tmp_path, argv, code):
    assert run([*argv, "--out", str(tmp_path)]) == code


def test_divergence_exits_3_and_keeps_report(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("numerics:\n  max_iter_outer: 1\n  grid_n: 33\n")
    out = tmp_path / "o"
    assert run(["solve", "--config", str(cfg), "--out", str(out)]) == 3
    rep = read(out / "report.json")
    assert "error" in rep and len(rep["history"]) == 1


def test_io_errors_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run(["lane-emden", "--out", str(blocker / "sub")]) == 4
    assert run(["lane-emden", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 4
    le = tmp_path / "le"
    run(["lane-emden", "--out", str(le)])
    assert run(["verify", str(le)]) == 4


def test_workers_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ROTSTAR_WORKERS", "many")
    assert run(["lane-emden", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    res = subprocess.run([sys.executable, "-m", "rotstar", "lane-emden", "--n-index", "0", "--out", str(tmp_path)],
                         capture_output=True, text=True, env=env, timeout=120)
    assert res.returncode == 0
    assert json.loads(res.stdout)["xi1"] == pytest.approx(np.sqrt(6), abs=1e-8)


def test_loglog_slope():
    assert loglog_slope([1, 2, 4], [1, 4, 16]) == pytest.approx(2.0)
    assert np.isnan(loglog_slope([1], [1]))
