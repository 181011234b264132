import json
import os
import subprocess
import sys

import pytest

from sigring import cli
from sigring.fileformat import bundled_path
from sigring.lower import LowerBoundResult
from sigring.solver import Status


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_degree_example_prints_two(capsys):
    code, out, _ = run(capsys, "degree", bundled_path("degree_example"), "--json")
    assert code == 0 and json.loads(out)["results"]["objective"] == 2


def test_lower_five_var_level_two(capsys):
    code, out, _ = run(capsys, "lower", bundled_path("five_var"), "--level", "2", "--json", "--no-recover")
    doc = json.loads(out)
    assert code == 0
    assert doc["bounds"][0]["bound"] == pytest.approx(10022.94, abs=0.5)
    assert doc["bounds"][0]["certificate"] == "verified"


def test_check_cert_roundtrip_and_tamper(capsys, tmp_path):
    cert = tmp_path / "toy_cert.json"
    code, _, _ = run(capsys, "lower", bundled_path("toy"), "--certificate-out", str(cert))
    assert code == 0
    code, out, _ = run(capsys, "check-cert", str(cert), "--json")
    assert code == 0 and json.loads(out)["results"]["passed"] is True
    doc = json.loads(cert.read_text())
    doc["summands"][0]["coefficients"][0] += 0.5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "check-cert", str(bad), "--json")
    res = json.loads(out)["results"]
    assert code == cli.EXIT_CHECK and not res["passed"]
    assert any(v.startswith("(a)") for v in res["violations"])


def _inconclusive(p, d, **kw):
    return LowerBoundResult(d, float("nan"), Status.INCONCLUSIVE)


def test_inconclusive_exit_code(capsys, monkeypatch):
    monkeypatch.setattr(cli, "solve_lower", _inconclusive)
    code, out, _ = run(capsys, "lower", bundled_path("toy"))
    assert code == cli.EXIT_INCONCLUSIVE and "INCONCLUSIVE" in out
    code, _, _ = run(capsys, "lower", bundled_path("toy"), "--best-effort")
    assert code == 0


def test_input_error_exit_code(capsys, tmp_path):
    f = tmp_path / "broken.json"
    f.write_text('{"dimension": 1, "objective": [{"coefficient": 1, "exponent": ["x"]}]}')
    code, _, err = run(capsys, "lower", str(f))
    assert code == cli.EXIT_INPUT and "objective[0].exponent" in err


def test_not_in_ring_exit_code(capsys, tmp_path):
    f = tmp_path / "ring.json"
    f.write_text(json.dumps({"dimension": 1, "ring": [[0], [2]],
                             "objective": [{"coefficient": 1, "exponent": [1]}]}))
    code, out, _ = run(capsys, "degree", str(f), "--json")
    assert code == cli.EXIT_CHECK and json.loads(out)["results"]["objective"] == "NOT_IN_RING"


def test_config_precedence_and_env(capsys, monkeypatch):
    monkeypatch.setenv("SIGRING_SOLVER_TOL", "1e-8")
    code, out, _ = run(capsys, "lower", bundled_path("five_var"), "--samples", "10", "--no-recover", "--json")
    doc = json.loads(out)
    assert doc["config"]["level"] == 2 and doc["config_sources"]["level"] == "file"
    assert doc["config_sources"]["samples"] == "flag"
    assert doc["config_sources"]["polish"] == "default"
    assert doc["config"]["solver_tol"] == 1e-8
    assert doc["config_sources"]["solver_tol"] == "env SIGRING_SOLVER_TOL"
    assert doc["defaults"]["level"] == 1


def test_report_dir_consistent(capsys, tmp_path):
    d = tmp_path / "rep"
    code, _, _ = run(capsys, "solve", bundled_path("toy_box"), "--level", "2", "--upper-level", "2",
                     "--per-dim", "2000", "--report-dir", str(d))
    assert code == 0
    assert {p.name for p in d.iterdir()} == {"report.json", "report.txt", "bounds.csv", "bounds.png"}
    doc = json.loads((d / "report.json").read_text())
    txt = (d / "report.txt").read_text()
    csv = (d / "bounds.csv").read_text()
    assert txt.splitlines()[0].startswith("command: sigring solve")
    for row in doc["bounds"]:
        assert repr(row["bound"]) in txt and repr(row["bound"]) in csv
    for k in ("lower_bound", "oracle_value", "upper_bound"):
        assert f"{k} = {doc['results'][k]!r}" in txt
    r = doc["results"]
    assert r["lower_bound"] <= r["oracle_value"] + 1e-6 <= r["upper_bound"] + 2e-6


def test_fold_and_exclude(capsys):
    code, out, _ = run(capsys, "degree", bundled_path("five_var"), "--exclude-tags", "convex", "--json")
    res = json.loads(out)["results"]
    assert code == 0 and "c5" not in res and "c1" in res


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "sigring.cli", "degree", bundled_path("degree_example")],
                         capture_output=True, text=True, env=dict(os.environ))
    assert out.returncode == 0 and "objective = 2" in out.stdout
