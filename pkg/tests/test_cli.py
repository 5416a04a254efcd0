import csv
import json
import math
import shutil
import subprocess

import pytest

from bergman_lab.cli import main


@pytest.fixture(autouse=True)
def _isolate_env(monkeypatch):
    monkeypatch.delenv("BERGMAN_LAB_THREADS", raising=False)


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main(["--out", str(out), *argv])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


def test_norm_constant(tmp_path, capsys):
    code, report, out = run(tmp_path, "norm", "--n", "1", "--p", "2", "--alpha", "0", "--f", "1")
    assert code == 0
    assert report["result"]["bergman_norm"] == pytest.approx(math.sqrt(math.pi), rel=1e-10)
    assert report["config"]["f"] == "1" and report["schema_version"]
    assert (out / "table.csv").exists() and (out / "run.json").exists()
    assert "1.77245" in capsys.readouterr().out


def test_norm_equivalent(tmp_path):
    code, report, _ = run(tmp_path, "norm", "--f", "z^5", "--equivalent")
    res = report["result"]
    assert code == 0
    assert res["bergman_norm"] == pytest.approx(math.sqrt(math.pi / 6), rel=1e-10)
    assert res["ratio"] == pytest.approx(res["equivalent_norm"] / res["bergman_norm"])


@pytest.mark.parametrize(
    "argv",
    [
        ["norm", "--p", "-1", "--f", "z"],
        ["norm", "--alpha", "-2", "--f", "z"],
        ["norm", "--f", "z^"],
        ["norm"],
        ["classify", "--g", "z", "--q", "0"],
        ["lattice", "--rmax", "1"],
        ["khinchine", "--c", "a,b"],
        ["repro"],
    ],
)
def test_validation_errors_exit_2(tmp_path, capsys, argv):
    code, _, _ = run(tmp_path, *argv)
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_p_constraint_named(tmp_path, capsys):
    run(tmp_path, "norm", "--p", "-1", "--f", "z")
    assert "p must be > 0" in capsys.readouterr().err


def test_classify_cesaro(tmp_path):
    code, report, out = run(tmp_path, "classify", "--g", "ces(1)", "--probe")
    assert code == 0
    res = report["result"]
    assert res["classification"]["label"] == "BOUNDED"
    assert res["consistency"]["status"] == "CONSISTENT"
    rows = list(csv.reader((out / "profile.csv").open()))
    assert rows[0] and len(rows) > 1


def test_classify_constancy_strict(tmp_path):
    argv = ["classify", "--g", "z", "--p", "1", "--q", "2", "--alpha", "1", "--beta", "0"]
    code, report, _ = run(tmp_path, *argv)
    assert code == 0
    assert report["result"]["classification"]["label"] == "UNBOUNDED"
    assert report["result"]["classification"]["constancy_flag"] is True
    code, _, _ = run(tmp_path, "--strict", *argv)
    assert code == 3


def test_classify_constant(tmp_path):
    code, report, _ = run(tmp_path, "classify", "--g", "3")
    assert code == 0
    assert report["result"]["classification"]["label"] in ("BOUNDED", "COMPACT")


def test_khinchine(tmp_path, capsys):
    code, report, _ = run(tmp_path, "khinchine", "--c", "3,4", "--p", "2")
    assert code == 0 and report["result"]["value"] == pytest.approx(25)
    assert capsys.readouterr().out.strip() == "25"


def test_lattice(tmp_path):
    code, report, out = run(tmp_path, "lattice", "--eta", "0.5", "--rmax", "0.9", "--probes", "2000")
    cert = report["result"]["lattice"]["cert"]
    assert code == 0 and cert["covering_ok"] and cert["separation_ok"]
    assert report["result"]["nodes"] == len(report["result"]["lattice"]["nodes"])


def test_repro_subset(tmp_path):
    code, report, _ = run(tmp_path, "repro", "--only", "2")
    assert code == 0
    assert report["result"]["failed"] == []


def test_byte_identical_reports(tmp_path):
    argv = ["classify", "--g", "pow(1; 0.5)", "--p", "2", "--q", "1", "--probe", "--seed", "3"]
    _, _, out = run(tmp_path, *argv)
    first = (out / "report.json").read_bytes()
    _, _, out = run(tmp_path, *argv)
    assert (out / "report.json").read_bytes() == first
    sidecar = json.loads((out / "run.json").read_text())
    assert sidecar["runtime_ms"] > 0 and "timestamp" in sidecar


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[common]\nseed = 7\n\n[norm]\nf = z\np = 4\n")
    _, report, _ = run(tmp_path, "--config", str(cfg), "norm", "--p", "2")
    assert report["config"]["seed"] == 7
    assert report["config"]["p"] == 2
    assert report["result"]["bergman_norm"] == pytest.approx(math.sqrt(math.pi / 2), rel=1e-10)
    cfg.write_text("[norm]\nbogus = 1\n")
    code, _, _ = run(tmp_path, "--config", str(cfg), "norm", name="bad")
    assert code == 2


def test_flags_after_subcommand(tmp_path):
    out = tmp_path / "late"
    assert main(["khinchine", "--c", "1,1", "--p", "1", "--out", str(out), "--seed", "2"]) == 0
    assert json.loads((out / "report.json").read_text())["config"]["seed"] == 2


def test_threads_flag_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv("BERGMAN_LAB_THREADS", "2")
    code, a, _ = run(tmp_path, "classify", "--g", "z", "--probe", name="env")
    code, b, _ = run(tmp_path, "--threads", "1", "classify", "--g", "z", "--probe", name="flag")
    assert a["result"] == b["result"]
    code, _, _ = run(tmp_path, "--threads", "-1", "classify", "--g", "z", name="neg")
    assert code == 2


@pytest.mark.skipif(shutil.which("bergman-lab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["bergman-lab", "--out", str(tmp_path), "khinchine", "--c", "1,1", "--p", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.strip() == "1"
