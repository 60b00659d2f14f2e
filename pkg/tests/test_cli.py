import csv
import io
import json
import math
import subprocess
import sys

import pytest

from locsim import FIG1
from locsim.cli import CSV_COLUMNS, main

from conftest import CORPUS, GOLDEN


def invoke(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = invoke(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_run_reference_circuit(capsys):
    rep = run_json(capsys, "run", FIG1, "--theta", "0.785398163")
    assert rep["success_probability"] == pytest.approx(0.25, abs=1e-9)
    assert rep["fidelity"] == pytest.approx(1.0, abs=1e-10)
    assert rep["schema_version"] == "1"
    assert len(rep["circuit_sha256"]) == 64
    assert [p["pattern"] for p in rep["patterns"]] == ["D1pH&D3pV", "D1pV&D3pH"]


def test_run_at_theta_zero_omits_fidelity(capsys):
    rep = run_json(capsys, "run", FIG1, "--theta", "0")
    assert rep["success_probability"] == 0.0
    assert "fidelity" not in rep
    assert all("fidelity" not in p for p in rep["patterns"])


def test_run_degrees(capsys):
    a = run_json(capsys, "run", FIG1, "--theta", "30", "--degrees")
    assert a["success_probability"] == pytest.approx(0.1875)


def test_run_is_byte_deterministic(capsys, tmp_path):
    timing = tmp_path / "t.json"
    first = invoke(capsys, "run", FIG1, "--timing-file", timing)[1]
    second = invoke(capsys, "run", FIG1)[1]
    assert first == second
    assert "elapsed" not in first
    assert "elapsed_s" in json.loads(timing.read_text())


def test_output_file(capsys, tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = invoke(capsys, "protocol", "--input", "psi-", "--theta", "0.3", "-o", target)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["input"] == "psi-"


def test_malformed_file_exit_2(capsys):
    path = CORPUS / "invalid" / "lexical.loc"
    code, out, err = invoke(capsys, "run", path)
    assert code == 2 and out == ""
    assert f"{path}:" in err and "E001" in err


@pytest.mark.parametrize("path", sorted((CORPUS / "invalid").glob("*.loc")), ids=lambda p: p.stem)
def test_negative_corpus_exit_codes(capsys, path):
    assert invoke(capsys, "run", path)[0] == 2


def test_missing_file_exit_2(capsys, tmp_path):
    assert invoke(capsys, "run", tmp_path / "nope.loc")[0] == 2


def test_runtime_error_exit_3(capsys, tmp_path):
    # two double-pair sources give eight photons, beyond the oracle cap
    lines = FIG1.read_text().replace("source phi+", "source double:phi+").splitlines()
    text = "\n".join(lines) + "\n"
    bad = tmp_path / "quad.loc"
    bad.write_text(text)
    code, _, err = invoke(capsys, "oracle-check", "--circuit", bad, "--cases", "0")
    assert code == 3, err
    assert "runtime error" in err


@pytest.mark.parametrize("argv", [
    ["protocol", "--theta", "2"],
    ["protocol", "--input", "chi+"],
    ["protocol", "--basis", "XY"],
    ["sweep", "--steps", "1"],
    ["sweep", "--theta-start", "1", "--theta-end", "0.5"],
    ["contaminate", "--w-nominal", "0.5", "--w-double-a", "0.2", "--w-double-b", "0.2"],
    ["oracle-check", "--circuit", str(FIG1), "--tolerance", "1e-13"],
    ["bogus"],
    [],
])
def test_usage_errors(capsys, argv):
    assert invoke(capsys, *argv)[0] == 2


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_csv(capsys):
    code, out, _ = invoke(capsys, "sweep", "--input", "phi+", "--steps", "65")
    assert code == 0
    assert out.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = _csv(out)
    assert len(rows) == 65
    thetas = [float(r["theta"]) for r in rows]
    assert thetas == sorted(thetas)
    best = max(rows, key=lambda r: float(r["success"]))
    assert float(best["theta"]) == pytest.approx(math.pi / 4)
    assert float(best["success"]) == pytest.approx(0.25, abs=1e-12)
    assert rows[0]["fidelity"] == "" and float(rows[1]["fidelity"]) == pytest.approx(1)


def test_psi_plus_sweep_success_matches_phi_plus(capsys):
    a = _csv(invoke(capsys, "sweep", "--input", "phi+", "--steps", "33")[1])
    b = _csv(invoke(capsys, "sweep", "--input", "psi+", "--steps", "33")[1])
    assert [r["success"] for r in a] == [r["success"] for r in b]


def test_sweep_json_and_threads(capsys, monkeypatch):
    serial = invoke(capsys, "sweep", "--steps", "5", "--basis", "RL", "--out", "json")[1]
    monkeypatch.setenv("LOC_THREADS", "2")
    parallel = invoke(capsys, "sweep", "--steps", "5", "--basis", "RL", "--out", "json")[1]
    assert serial == parallel
    rows = json.loads(serial)["rows"]
    assert "fidelity" not in rows[0] and rows[2]["fidelity"] == pytest.approx(1)


def test_contaminate_double_branch(capsys):
    rep = run_json(capsys, "contaminate", "--theta", math.pi / 4,
                   "--w-nominal", 0, "--w-double-a", 1, "--w-double-b", 0)
    branch = next(b for b in rep["branches"] if b["branch"] == "double_A")
    frozen = json.loads((GOLDEN / "double_a.json").read_text())
    for p, g in zip(branch["patterns"], frozen["patterns"]):
        assert p["probability"] == pytest.approx(1 / 12, abs=1e-12)
        assert p["fidelity"] == pytest.approx(g["fidelity"], abs=1e-12)
    assert rep["fidelity"] == pytest.approx(branch["fidelity"])


def test_contaminate_nominal(capsys):
    rep = run_json(capsys, "contaminate", "--w-nominal", 1, "--w-double-a", 0, "--w-double-b", 0)
    assert rep["fidelity"] == pytest.approx(1.0, abs=1e-12)


def test_contaminate_renormalizes_within_tolerance(capsys):
    rep = run_json(capsys, "contaminate", "--w-nominal", 0.8 + 5e-10, "--w-double-a", 0.1, "--w-double-b", 0.1)
    assert sum(b["weight"] for b in rep["branches"]) == pytest.approx(1, abs=1e-15)


def test_oracle_check_reference(capsys):
    rep = run_json(capsys, "oracle-check", "--circuit", FIG1, "--cases", 10, "--tolerance", 1e-10)
    assert rep["passed"] and rep["failures"] == 0 and rep["cases"] == 11
    assert rep["max_deviation"] < 1e-12


@pytest.mark.parametrize("path", sorted((CORPUS / "valid").glob("*.loc")), ids=lambda p: p.stem)
def test_oracle_check_corpus(capsys, path):
    assert invoke(capsys, "oracle-check", "--circuit", path, "--cases", 3)[0] == 0


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "locsim", "protocol", "--theta", "0.5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["command"] == "protocol"
