import csv
import io
import json
import subprocess
import sys

import pytest

from gptlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_fidelity_classical_example(capsys):
    code, out, _ = run(capsys, "fidelity", "--model", "builtin:classical:2", "--state-a", "1,0", "--state-b", "0,1")
    d = json.loads(out)
    assert code == 0 and d["value"] == 0.0 and d["method"] == "exact-LP"
    assert d["optimal_measurement"]["p"] is not None


def test_fidelity_barycentric_and_sampled(capsys):
    code, out, _ = run(capsys, "fidelity", "--model", "builtin:classical:3", "--coords", "bary",
                       "--state-a", "0.2,0.3,0.5", "--state-b", "0.5,0.25,0.25")
    exact = json.loads(out)["value"]
    expected = (0.2 * 0.5) ** 0.5 + (0.3 * 0.25) ** 0.5 + (0.5 * 0.25) ** 0.5
    assert code == 0 and exact == pytest.approx(expected, abs=1e-9)
    code, out, _ = run(capsys, "fidelity", "--model", "builtin:classical:3", "--coords", "bary",
                       "--state-a", "0.2,0.3,0.5", "--state-b", "0.5,0.25,0.25",
                       "--method", "sampled", "--samples", "500", "--seed", "3")
    assert code == 0 and json.loads(out)["value"] >= exact - 1e-9


def test_fidelity_errors(capsys):
    code, _, err = run(capsys, "fidelity", "--model", "builtin:nosuch", "--state-a", "1", "--state-b", "1")
    assert code == 1 and "unknown" in err
    code, _, err = run(capsys, "fidelity", "--model", "builtin:classical:2", "--state-a", "1,x", "--state-b", "0,1")
    assert code == 1 and "--state-a" in err
    code, _, _ = run(capsys, "fidelity", "--model", "builtin:classical:2", "--state-a", "2,0", "--state-b", "0,1")
    assert code == 1
    code, _, _ = run(capsys, "nonsense")
    assert code == 1


def test_simulate_exit_codes(capsys):
    code, out, _ = run(capsys, "simulate", "--scenario", "builtin:oscillating-recorder")
    d = json.loads(out)
    assert code == 0 and d["verdict"]["outcome"] == "CONSISTENT"
    assert d["repeatability"][0]["classification"] == "weak"
    code, out, _ = run(capsys, "simulate", "--scenario", "builtin:nonorthogonal-probe")
    d = json.loads(out)
    assert code == 2 and d["verdict"]["violated_premise"] == "product-form"


def test_simulate_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--scenario", "builtin:cnot-copy", "--j-max", "3", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0 and rows[0] == ["stage", "j", "F_system", "F_record", "bound"]
    assert len(rows) == 1 + 2 * 4
    assert rows[1] == ["1", "0", "0.0", "0.0", "1.0"]


def test_audit_roundtrip(capsys, tmp_path):
    out_file = tmp_path / "trace.json"
    code, _, _ = run(capsys, "simulate", "--scenario", "builtin:nonorthogonal-probe", "--out", str(out_file))
    assert code == 2 and out_file.exists()
    code, out, _ = run(capsys, "audit", str(out_file))
    assert code == 2 and json.loads(out)["verdict"]["violated_premise"] == "product-form"
    out_file.write_text('{"stages": [')
    code, _, err = run(capsys, "audit", str(out_file))
    assert code == 1 and "line 1" in err


def test_audit_synthetic_claim(capsys, tmp_path):
    p = tmp_path / "claim.json"
    p.write_text(json.dumps({"j_max": 100, "certificates": [{"stage": 1, "certified": True}],
                             "stages": [{"f_record": 0.8, "f_system": [0.5]}]}))
    code, out, _ = run(capsys, "audit", str(p))
    assert code == 2 and json.loads(out)["verdict"]["violated_premise"] == "orthogonality-chain"


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "--model", "builtin:classical:2", "--model", "builtin:gbit",
                       "--trials", "10", "--seed", "1")
    d = json.loads(out)
    assert code == 0 and d["passed"] is True


def test_models_list_and_export(capsys, tmp_path):
    code, out, _ = run(capsys, "models", "list")
    d = json.loads(out)
    assert code == 0 and "builtin:oscillating-recorder" in d["scenarios"]
    assert all(row["valid"] for row in d["models"])
    dest = tmp_path / "gbit.json"
    code, _, _ = run(capsys, "models", "export", "--model", "builtin:gbit", "--out", str(dest))
    assert code == 0
    code, out, _ = run(capsys, "fidelity", "--model", str(dest), "--state-a", "1,1", "--state-b", "-1,-1")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.0, abs=1e-9)
    sc = tmp_path / "sc.json"
    assert run(capsys, "models", "export", "--scenario", "builtin:cnot-copy", "--out", str(sc))[0] == 0
    assert run(capsys, "simulate", "--scenario", str(sc))[0] == 0
    assert run(capsys, "models", "export")[0] == 1


def test_human_format(capsys):
    code, out, _ = run(capsys, "simulate", "--scenario", "builtin:oscillating-recorder", "--format", "human")
    assert code == 0 and "outcome: CONSISTENT" in out


def test_console_entry_point_bytes_identical():
    cmd = [sys.executable, "-m", "gptlab.cli", "fidelity", "--model", "builtin:bloch:200",
           "--state-a", "0.3,0.1,-0.2", "--state-b", "-0.1,0.4,0.5", "--method", "sampled",
           "--samples", "300", "--seed", "42"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and json.loads(a)["method"].startswith("sampled")
