import json
import subprocess
import sys

import numpy as np
import pytest

from qmarkov import io
from qmarkov.cli import run_command
from qmarkov.generate import NEGATIVE_KINDS, gen_negative
from qmarkov.tensor import DensityOperator, SystemLayout

LN2 = np.log(2)


def run(*argv):
    code, report = run_command(list(argv) + ["--quiet"])
    assert report.exit_code == code
    return code, json.loads(report.to_json())


@pytest.fixture
def files(tmp_path):
    lay = SystemLayout.of(A=2, B=2, C=2)
    psi = np.zeros(8)
    psi[[0, 7]] = 1 / np.sqrt(2)
    paths = {"ghz_mix": tmp_path / "ghz_mix.qstate", "ghz_pure": tmp_path / "ghz_pure.qstate",
             "prod": tmp_path / "prod.qstate"}
    io.write_state(paths["ghz_mix"], DensityOperator(lay, np.diag([0.5, 0, 0, 0, 0, 0, 0, 0.5])))
    io.write_state(paths["ghz_pure"], DensityOperator.from_matrix(lay, np.outer(psi, psi)))
    io.write_state(paths["prod"], DensityOperator(lay, np.eye(8) / 8))
    return paths


def test_check(files):
    code, rep = run("check", "--state", str(files["ghz_mix"]), "--chain", "A-B-C")
    assert code == 0 and abs(rep["diagnostics"]["cmi"]) <= 1e-12 and rep["verdict"] == "holds"
    code, rep = run("check", "--state", str(files["ghz_pure"]), "--chain", "A-B-C")
    assert code == 2 and abs(rep["diagnostics"]["cmi"] - LN2) <= 1e-9 and rep["verdict"] == "fails"


def test_double(files):
    code, rep = run("double", "--state", str(files["prod"]))
    assert code == 0 and rep["diagnostics"]["labels"] == 1
    code, rep = run("double", "--state", str(files["ghz_mix"]))
    assert code == 0 and rep["diagnostics"]["labels"] == 2
    code, rep = run("double", "--state", str(files["ghz_pure"]))
    assert code == 2 and rep["error"]["type"] == "NotMarkovError"


def test_decompose_writes_summary(files, tmp_path):
    out = tmp_path / "blocks.json"
    code, rep = run("decompose", "--state", str(files["ghz_mix"]), "--chain", "A-B-C", "--out", str(out))
    assert code == 0 and len(rep["diagnostics"]["blocks"]) == 2
    assert json.loads(out.read_text())["blocks"] == rep["diagnostics"]["blocks"]
    code, rep = run("decompose", "--state", str(files["prod"]), "--x", "A")
    assert code == 0 and rep["diagnostics"]["blocks"][0]["d2"] == 4


def test_errors_exit_one(tmp_path, files):
    bad = tmp_path / "bad.qstate"
    bad.write_text("qstate v1\nsystems A:2\nmatrix\n0.49 0\n0 0\n0 0\n0.49 0\n")
    code, rep = run("check", "--state", str(bad), "--chain", "A-B-C")
    assert code == 1 and rep["error"]["type"] == "ValidationError" and rep["diagnostics"]["invariant"] == "trace"
    bad.write_text("qstate v1\nsystems A:2\nmatrix\nx y\n")
    code, rep = run("check", "--state", str(bad), "--chain", "A-B-C")
    assert code == 1 and rep["error"]["type"] == "ParseError" and rep["diagnostics"]["line"] == 4
    code, rep = run("check", "--state", str(tmp_path / "missing"), "--chain", "A-B-C")
    assert code == 1
    code, rep = run("nonsense")
    assert code == 1 and rep["error"]["type"] == "UsageError"
    code, rep = run("check", "--state", str(files["prod"]), "--chain", "A-B-Q")
    assert code == 1 and rep["error"]["type"] == "LayoutError"


def test_thm2_and_negative(tmp_path):
    path = tmp_path / "t.qstate"
    code, _ = run("gen", "--kind", "thm2", "--seed", "3", "--out", str(path))
    assert code == 0
    truth = json.loads((tmp_path / "t.qstate.truth.json").read_text())
    code, rep = run("thm2", "--state", str(path), "--seed", "3")
    assert code == 0
    assert sorted(b["weight"] for b in rep["diagnostics"]["d_blocks"]) == pytest.approx(sorted(truth["weights"]), abs=1e-8)
    neg = tmp_path / "n.qstate"
    run("gen", "--kind", "negative:thm2_rank_deficient", "--out", str(neg))
    code, rep = run("thm2", "--state", str(neg))
    assert code == 1 and rep["error"]["type"] == "FullSupportError"


def test_gen_with_explicit_blocks(tmp_path):
    path = tmp_path / "m.qstate"
    code, rep = run("gen", "--kind", "markov", "--blocks", "2x1,1x2", "--dims", "A=2,C=2", "--out", str(path))
    assert code == 0
    assert io.read_state(path).layout.dims == (2, 4, 2)
    code, rep = run("decompose", "--state", str(path), "--chain", "A-B-C")
    assert sorted((b["d1"], b["d2"]) for b in rep["diagnostics"]["blocks"]) == [(1, 2), (2, 1)]


def test_classical(tmp_path):
    for lemma, kind in ((1, "lemma1"), (2, "lemma2")):
        path = tmp_path / f"{kind}.qpmf"
        assert run("gen", "--kind", kind, "--seed", "5", "--out", str(path))[0] == 0
        code, rep = run("classical", "--pmf", str(path), "--lemma", str(lemma))
        assert code == 0, rep


def test_report_file_and_env_seed(files, tmp_path, monkeypatch):
    monkeypatch.setenv("QMARKOV_SEED", "42")
    report = tmp_path / "r.json"
    code, rep = run("double", "--state", str(files["ghz_mix"]), "--report", str(report))
    assert rep["seed"] == 42
    assert json.loads(report.read_text()) == rep
    assert rep["tolerances"]["cmi"] == 1e-8
    code, rep = run("double", "--state", str(files["ghz_mix"]), "--tol-cmi", "1e-6")
    assert rep["tolerances"]["cmi"] == 1e-6


def test_reports_deterministic(tmp_path):
    path = tmp_path / "d.qstate"
    run("gen", "--kind", "double", "--seed", "9", "--out", str(path))
    a = run_command(["double", "--state", str(path), "--seed", "1", "--quiet"])[1].to_json()
    b = run_command(["double", "--state", str(path), "--seed", "1", "--quiet"])[1].to_json()
    assert a == b


@pytest.mark.parametrize("kind", NEGATIVE_KINDS)
def test_exit_codes_on_negatives(kind, tmp_path):
    path = tmp_path / "neg.qstate"
    io.write_state(path, gen_negative(kind))
    command = "thm2" if kind == "thm2_rank_deficient" else "double"
    expected = 1 if kind == "thm2_rank_deficient" else 2
    assert run(command, "--state", str(path))[0] == expected


def test_module_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "qmarkov.cli", "check", "--state", str(files["ghz_pure"]),
                           "--chain", "A-B-C"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stdout)["verdict"] == "fails"
