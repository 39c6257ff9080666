import csv
import json

import pytest

from dyncap.cli import EXIT_INVARIANT, EXIT_IO, EXIT_OK, EXIT_SCHEDULE, main

SOLVE = ["--eps", "0.1", "--grid-N", "64", "--box-L", "2", "--T", "0.1", "--slab-dt", "0.05"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "run"
    assert main(["solve", "--out", str(out), *SOLVE]) == EXIT_OK
    return out


def test_solve_writes_a_trajectory(run_dir, capsys):
    assert (run_dir / "manifest.json").exists() and (run_dir / "arrays.npz").exists()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["checks"]["estimates_pass"] is True
    assert manifest["config"]["delta"] == pytest.approx(1e-3)


def test_audit(run_dir, tmp_path, capsys):
    assert main(["audit", str(run_dir), "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["verdict"] == "pass"
    with open(tmp_path / "audit.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "t" and len(rows) == 4


def test_kinetic(run_dir, tmp_path, capsys):
    assert main(["kinetic", "--traj", str(run_dir), "--out", str(tmp_path), "--lambda-points", "64"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["monotone"] and report["truncation_err_max"] <= report["lambda_spacing"]
    assert (tmp_path / "kinetic_defects.csv").exists()


def test_reference(tmp_path, capsys):
    out = tmp_path / "ref"
    assert main(["reference", "--out", str(out), "--cells", "256", "--box-L", "2", "--T", "0.2", "--slab-dt", "0.1"]) == EXIT_OK
    assert len(list(out.glob("snap_*.txt"))) == 3


def test_sweep_with_config_file_and_determinism(tmp_path, capsys):
    cfg = {
        "grid_N": 64,
        "box_L": 2.0,
        "T": 0.05,
        "slab_dt": 0.05,
        "cells": 256,
        "lambda_points": 64,
        "sweep": {"eps_list": [0.1, 0.05]},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["--config", str(path), "sweep", "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "b"), "--workers", "2"]) == EXIT_OK
    a, b = (tmp_path / "a" / "sweep.csv").read_bytes(), (tmp_path / "b" / "sweep.csv").read_bytes()
    assert a == b and a.count(b"\n") == 3


def test_rejected_schedule_exit_code(tmp_path, capsys):
    code = main(["sweep", "--a", "3", "--b", "0.25", "--regime", "i", "--out", str(tmp_path)])
    assert code == EXIT_SCHEDULE
    assert json.loads(capsys.readouterr().out)["verdict"] == "rejected"


def test_io_errors(tmp_path, capsys):
    assert main(["audit", str(tmp_path / "missing")]) == EXIT_IO
    assert main(["audit"]) == EXIT_IO
    assert main(["solve", "--grid-N", "many"]) == EXIT_IO
    assert main(["--config", str(tmp_path / "nope.json"), "solve"]) == EXIT_IO
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad), "solve"]) == EXIT_IO
    assert main(["kinetic", str(tmp_path), "--lambda-points", "8"]) == EXIT_IO
    assert main(["sweep", "--eps-list", "0.1,0.2", "--out", str(tmp_path)]) == EXIT_IO


def test_invariant_failure_exit_code(tmp_path, capsys):
    # a mollifier too tight for the flux window is a model error, not IO
    code = main(["solve", "--out", str(tmp_path), "--eps", "0.5", "--grid-N", "32", "--box-L", "4", "--T", "0.01"])
    assert code == EXIT_INVARIANT
