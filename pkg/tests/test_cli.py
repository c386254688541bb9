"""Command line interface: exit codes, artifacts and determinism."""
import json
import subprocess
import sys

import numpy as np
import pytest

from freeboundary import fields
from freeboundary.cli import main, parse_grid
from freeboundary.grid import DiskGrid


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("FREEBOUNDARY_GRID", raising=False)
    return tmp_path


def test_parse_grid():
    assert parse_grid("32x64") == (32, 64)
    for bad in ("32", "32x63", "ax64"):
        with pytest.raises(Exception):
            parse_grid(bad)


def test_unknown_flag_exits_2(capsys):
    assert main(["spectrum", "--bogus"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["check", "--grid", "32x63"]) == 2


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "monitor" in capsys.readouterr().out


def test_spectrum_rows(capsys):
    assert main(["spectrum", "--kmax", "5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "k,eigenvalue,rel_err"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [1, 2, 3, 4, 5]
    assert all(float(l.split(",")[2]) < 1e-8 for l in lines[1:])


def test_check_subset(in_tmp, capsys):
    assert main(["check", "--grid", "32x64", "--criteria", "1,4"]) == 0
    err = capsys.readouterr().err
    assert "PASS criterion 1" in err and "PASS criterion 4" in err and "PASS criterion 10" in err
    report = json.loads((in_tmp / "check-report.json").read_text())
    assert report["passed"] is True
    assert main(["check", "--criteria", "11"]) == 2


def test_poisson_csv(capsys):
    assert main(["poisson", "--grids", "8x16,16x32"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "n_r,n_theta,err_inf,err_l2,order"
    assert float(lines[-1].split(",")[2]) < 1e-8


def test_project_and_smooth_roundtrip(in_tmp, capsys):
    g = DiskGrid(16, 32)
    U = np.array([g.y[0] ** 2, np.sin(g.y[1])])
    fields.save(in_tmp / "u.txt", g, U, "vector")
    assert main(["project", "--in", "u.txt", "--out", "pu.txt"]) == 0
    g2, PU, kind = fields.load(in_tmp / "pu.txt")
    assert kind == "vector" and g2 == g
    info = json.loads(capsys.readouterr().err)
    assert info["div_max"] < 1e-8
    fields.save(in_tmp / "s.txt", g, np.full(g.shape, 3.0))
    assert main(["smooth", "--theta", "4", "--in", "s.txt", "--out", "ss.txt"]) == 0
    assert np.abs(fields.load(in_tmp / "ss.txt")[1] - 3.0).max() < 1e-12
    # wrong snapshot kind is a setup error
    assert main(["smooth", "--theta", "4", "--in", "u.txt", "--out", "x.txt"]) == 2


def test_config_file_and_override(in_tmp, capsys):
    (in_tmp / "c.json").write_text(json.dumps({"kmax": 2, "grid": "32x64"}))
    assert main(["spectrum", "--config", "c.json"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 3
    assert main(["spectrum", "--config", "c.json", "--kmax", "3"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 4
    (in_tmp / "bad.json").write_text(json.dumps({"frobnicate": 1}))
    assert main(["spectrum", "--config", "bad.json"]) == 2


def test_failure_writes_report(in_tmp, capsys):
    code = main(["monitor", "--grid", "16x32", "--path", "rotation", "--report", "mon.json"])
    assert code == 1
    rep = json.loads((in_tmp / "mon.json").read_text())
    assert rep["passed"] is False and rep["command"] == "monitor"
    assert main(["monitor", "--grid", "16x32"]) == 0


def test_evolve_deterministic_bytes(in_tmp):
    args = ["evolve", "--grid", "24x48", "--T", "0.06", "--dt", "0.02", "--background", "static"]
    assert main(args + ["--out", "a.csv"]) == 0
    assert main(args + ["--out", "b.csv"]) == 0
    a = (in_tmp / "a.csv").read_bytes()
    assert a == (in_tmp / "b.csv").read_bytes()
    assert a.startswith(b"t,E0,E1,divW_max,residual")


def test_evolve_cfl_violation_exits_2():
    assert main(["evolve", "--grid", "24x48", "--dt", "0.5", "--T", "1"]) == 2


def test_console_script_entry(in_tmp):
    out = subprocess.run([sys.executable, "-m", "freeboundary.cli", "spectrum", "--kmax", "1",
                          "--grid", "32x64"], capture_output=True, text=True, check=True)
    assert out.stdout.splitlines()[0] == "k,eigenvalue,rel_err"


def test_nashmoser_toy_report(in_tmp):
    assert main(["nashmoser", "--grid", "16x32", "--out", "nm.json"]) == 0
    rep = json.loads((in_tmp / "nm.json").read_text())
    assert rep["converged"] is True
    assert rep["newton_match"] < 1e-8
