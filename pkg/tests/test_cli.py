import csv
import json
import subprocess
import sys

from psido.cli import main

ROOT = __import__("pathlib").Path(__file__).resolve().parents[1]


def run(*args):
    return subprocess.run([sys.executable, "-m", "psido.cli", *args], capture_output=True, text=True, cwd=ROOT)


def test_residue_prints_seven_decimals():
    proc = run("residue", "--op", "(1+n^2)^-0.5")
    assert proc.returncode == 0
    assert proc.stdout.strip() == "2.0000000"


def test_bad_expression_exits_two():
    proc = run("residue", "--op", "(1+n^2)^½")
    assert proc.returncode == 2
    assert "column 9" in proc.stderr


def test_trace_json_value(capsys):
    assert main(["trace", "--op", "(1+n^2)^0.25", "--format", "json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["value"]["re"] - 1.7474521895293176) < 1e-10
    assert out["settings"]["depth"] == 8


def test_weighted_logdet_from_config(capsys):
    # log det_zeta(1 - Lap) = log(4 sinh(pi)^2); the weighted determinant agrees for this commuting weight
    assert main(["logdet", "--config", str(ROOT / "configs" / "operators" / "logdet_query.json"), "--format", "json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["value"]["re"] - 6.2794469300261163) < 1e-7


def test_verify_reports_are_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["verify", "residues", "--out", str(tmp_path / d)]) == 0
    for name in ("report_residues.json", "summary_residues.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = list(csv.DictReader((tmp_path / "a" / "summary_residues.csv").open()))
    assert list(rows[0]) == ["check_id", "paper_ref", "value", "reference", "tolerance", "pass"]
    report = json.loads((tmp_path / "a" / "report_residues.json").read_text())
    assert report["pass"] and "config" in report


def test_verify_failure_exit_code(tmp_path):
    assert main(["verify", "residues", "--tol", "1e-300", "--out", str(tmp_path)]) == 1
    report = json.loads((tmp_path / "report_residues.json").read_text())
    assert not report["pass"]
    assert any(not c["pass"] for c in report["checks"])
