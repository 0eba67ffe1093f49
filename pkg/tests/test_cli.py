import csv
import json

import pytest

from canceling_lab import algebra
from canceling_lab.cli import report_hash, run


def read_report(capsys):
    return json.loads(capsys.readouterr().out)


def test_classify_gradient(capsys):
    assert run(["classify", "gradient.json"]) == 0
    rep = read_report(capsys)
    assert rep["result"]["elliptic"] is True
    assert rep["result"]["canceling"] == {"1": True}


def test_classify_from_file(tmp_path, capsys):
    path = tmp_path / "op.json"
    path.write_text(json.dumps(algebra.preset("deformation", 3).to_json()))
    assert run(["classify", str(path)]) == 0
    assert read_report(capsys)["result"]["canceling"] == {"1": True, "2": True}


def test_certify_cauchy_riemann_fails_with_diagnostic(capsys):
    assert run(["certify", "cauchy_riemann.json"]) == 2
    rep = read_report(capsys)
    assert rep["result"]["error"] == "construction"
    assert rep["result"]["diagnostic"]["residual_dim"] == 2


def test_certify_gradient(tmp_path, capsys):
    assert run(["certify", "gradient:3", "--seed", "1", "--budget", "64", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["result"]["verification"]["passed"]
    assert rep["manifest"]["seed"] == 1 and rep["manifest"]["budget"] == 64
    assert rep["sha256"] == report_hash(rep)


def test_verify_zero_case_is_degenerate(tmp_path, capsys):
    assert run(["verify", "zero", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(r["ratio"] == "degenerate" for r in rows)
    assert list(rows[0]) == ["case", "lhs", "rhs", "ratio", "h", "cells", "seed"]


def test_verify_case_file(tmp_path, capsys):
    case = {"cases": [
        {"id": "g", "check": "alvino",
         "field": {"n": 2, "shape": [64, 64], "h": 0.125, "generator": "gaussian_bump"}},
        {"id": "c", "check": "certificate", "operator": {"preset": "deformation", "n": 2},
         "field": {"n": 2, "shape": [64, 64], "h": 0.125, "kind": "vector",
                   "generator": {"name": "gaussian_bump", "params": {"direction": [1, 0]}}}},
        {"id": "f", "check": "directional",
         "family": {"expand": {"w": [[1, 0], [0, 1], [1, 1]], "v": [[1, 0], [0, 1], [1, 1]]}},
         "field": {"n": 2, "shape": [64, 64], "h": 0.125, "kind": "vector",
                   "generator": {"name": "gaussian_bump", "params": {"direction": [1, 2]}}}},
    ]}
    path = tmp_path / "case.json"
    path.write_text(json.dumps(case))
    assert run(["verify", str(path)]) == 0
    reports = read_report(capsys)["result"]["reports"]
    assert [r["case"] for r in reports] == ["g", "c", "f"]
    assert all(r["ratio"] > 0 for r in reports)


def test_malformed_json_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"n": 2,\n  "coeffs": [1, }')
    assert run(["classify", str(path)]) == 1
    err = capsys.readouterr().err
    assert "bad.json:2:" in err


def test_unknown_inputs_are_input_errors(capsys):
    assert run(["classify", "no_such_operator.json"]) == 1
    assert run(["verify", "no_such_case.json"]) == 1
    assert run(["lw-demo", "no_such_voxels.json"]) == 1


def test_lw_demo_preset(tmp_path, capsys):
    assert run(["lw-demo", "parallelepiped", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["case", "lhs", "rhs", "ratio", "tolerance"]


def test_extremize(tmp_path, capsys):
    spec = {"problem": "alvino", "generator": "gaussian_bump",
            "grid": {"n": 2, "shape": [48, 48], "h": 0.2},
            "bounds": {"sigma": [0.6, 1.2]}}
    path = tmp_path / "search.json"
    path.write_text(json.dumps(spec))
    assert run(["extremize", str(path), "--budget", "4"]) == 0
    rep = read_report(capsys)
    assert rep["result"]["evaluations"] <= 4
    spec["fixed"] = {"amplitude": 0.0}
    path.write_text(json.dumps(spec))
    assert run(["extremize", str(path), "--budget", "3"]) == 2


def test_thread_cap_is_validated(monkeypatch, capsys):
    monkeypatch.setenv("CANCELING_LAB_THREADS", "0")
    assert run(["verify", "zero"]) == 1
    monkeypatch.setenv("CANCELING_LAB_THREADS", "1")
    assert run(["verify", "zero"]) == 0


def test_help_documents_schemas(capsys):
    with pytest.raises(SystemExit):
        run(["--help"])
    out = capsys.readouterr().out
    for word in ("operator", "coeffs", "case", "search", "voxel", "CANCELING_LAB_THREADS"):
        assert word in out
