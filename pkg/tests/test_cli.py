import csv
import io
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from robinneck.cli import main
from robinneck.mesh import load_mesh
from robinneck.reduced import blowup_exponent

COARSE = "mesh: {theta: 0.5, h_max: 0.5}\n"


@pytest.fixture
def cfg_file(tmp_path):
    def make(text):
        p = tmp_path / "cfg.yaml"
        p.write_text(text)
        return str(p)
    return make


def test_solve_prints_summary(cfg_file, capsys):
    path = cfg_file("physics: {gamma: [2.0], eps: [5.0e-2], phi: X1}\n" + COARSE)
    assert main(["solve", path]) == 0
    out = capsys.readouterr().out
    assert out.startswith("[summary]\n")
    kv = dict(line.split("=", 1) for line in out.splitlines()[1:])
    assert float(kv["eps"]) == 0.05 and float(kv["gamma"]) == 2.0
    assert kv["check.energy_ok"] == "True"


def test_invalid_config_exit_1(cfg_file, capsys):
    path = cfg_file("physics: {gamma: [2.0], eps: [0.25], phi: X1}\nbogus: 1\n")
    assert main(["solve", path]) == 1
    err = capsys.readouterr().err
    assert "R0/4" in err and "bogus" in err


def test_missing_file_exit_1(capsys):
    assert main(["solve", "/nonexistent/cfg.yaml"]) == 1


def test_numerical_failure_exit_2(cfg_file, tmp_path, capsys):
    path = cfg_file("physics: {gamma: [2.0], eps: [1.0e-4], phi: X1}\nmesh: {vertex_cap: 1000}\n")
    assert main(["solve", path]) == 2
    assert "MeshBudgetError" in capsys.readouterr().err
    assert main(["sweep", path, "--out", str(tmp_path / "out")]) == 2
    assert "every sweep cell failed" in capsys.readouterr().err


def test_argparse_error_exit_1(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["ode", "--gamma", "2"]) == 1


def test_ode_csv(capsys):
    assert main(["ode", "--n", "2", "--gamma", "2", "--eps", "1e-3"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["r", "h", "sub", "super", "lower_bound"]
    r = np.array([float(x["r"]) for x in rows])
    h = np.array([float(x["h"]) for x in rows])
    sup = np.array([float(x["super"]) for x in rows])
    lb = np.array([float(x["lower_bound"]) for x in rows])
    assert h[-1] == 1.0
    assert np.all(h[1:-1] > r[1:-1]) and np.all(h[1:-1] < sup[1:-1]) and np.all(h > lb)


def test_ode_domain_error(capsys):
    assert main(["ode", "--gamma", "0.5", "--eps", "1e-3"]) == 1
    assert "mu*gamma > 1" in capsys.readouterr().err


def test_alpha_table(capsys):
    assert main(["alpha", "--n", "2", "3", "--gamma", "2", "--mu", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["n", "gamma", "mu", "alpha", "alpha_1", "alpha_2", "alpha_3"]
    row2 = lines[1].split()
    assert_allclose(float(row2[3]), blowup_exponent(2, 2.0), rtol=1e-8)
    assert row2[5] == "-"
    row3 = lines[2].split()
    assert float(row3[4]) < float(row3[5]) < float(row3[6])


def test_mesh_dump(cfg_file, tmp_path):
    path = cfg_file("physics: {gamma: [2.0], eps: [5.0e-2], phi: X1}\n" + COARSE)
    out = tmp_path / "mesh.txt"
    assert main(["mesh", "dump", path, "-o", str(out)]) == 0
    mesh = load_mesh(out.read_text())
    assert mesh.n_triangles > 0


def test_sweep_and_report(cfg_file, tmp_path, capsys):
    path = cfg_file("physics: {gamma: [2.0], eps: [5.0e-2, 1.0e-2], phi: X1}\n" + COARSE)
    out = tmp_path / "out"
    assert main(["sweep", path, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "PASS structural.energy_ok" in text
    for name in ("sweep.csv", "summary.json", "blowup.svg", "profile.svg"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["cells"]) == 2
    rep = tmp_path / "rep"
    assert main(["report", str(out / "sweep.csv"), "--out", str(rep)]) == 0
    assert (rep / "sweep.csv").read_text() == (out / "sweep.csv").read_text()


def test_report_rejects_bad_csv(tmp_path):
    bad = tmp_path / "x.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["report", str(bad)]) == 1
