import json
import math
import subprocess
import sys

import pytest

from qmke.algebra import StateParams, state_from_angles
from qmke.cli import main
from qmke.solvers import MeasurementRecord, mke_pair

SMALL = ["--n-theta", "5", "--n-s", "5"]

GOLDEN_HEADERS = {
    "sweep-fidelity": "theta,s,mu,phi,fidelity,purity_exact,purity_approx,K_exact,K_approx,"
                      "fid_exact_to_prior,fid_approx_to_prior,D_hamiltonian,error",
    "ratio-surface": "theta,s,mu,phi,fidelity,purity_exact,purity_approx,K_exact,K_approx,"
                     "fid_exact_to_prior,fid_approx_to_prior,D_hamiltonian,ratio_Z,error",
    "ham-distance": "theta,s,mu,phi,fidelity,purity_exact,purity_approx,K_exact,K_approx,"
                    "fid_exact_to_prior,fid_approx_to_prior,D_hamiltonian,"
                    "h_exact_1,h_exact_2,h_exact_3,h_approx_1,h_approx_2,h_approx_3,error",
    "min-fid-curve": "mu,kind,theta,s,min_fidelity,n_errors,error",
    "purity-scatter": "index,theta,s,mu,mu_exact,mu_approx,R_mu,resamples,error",
    "oracle-check": "index,theta,phi,mu,s,K_exact,K_approx,K_oracle,oracle_gap,oracle_dominated,"
                    "exact_beats_approx,error",
}

COMMANDS = {
    "sweep-fidelity": ["--mu", "0.7", *SMALL],
    "ratio-surface": ["--mu", "0.7", *SMALL],
    "ham-distance": ["--mu", "0.7", *SMALL],
    "min-fid-curve": ["--mu-values", "0.6", "0.8", *SMALL],
    "purity-scatter": ["--samples", "6"],
    "oracle-check": ["--instances", "3", "--resolution", "60"],
}


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def header_and_body(text):
    lines = text.splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return meta, body


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_csv_schema_is_pinned(command, capsys):
    code, out, _ = run([command, *COMMANDS[command]], capsys)
    assert code == 0
    meta, body = header_and_body(out)
    assert body[0] == GOLDEN_HEADERS[command]
    assert meta[-1].startswith("# timestamp: ")
    assert any(ln.startswith("# version: ") for ln in meta)
    assert any(ln.startswith("# seed: ") for ln in meta)


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_reproducible_minus_timestamp(command, capsys):
    _, a, _ = run([command, *COMMANDS[command]], capsys)
    _, b, _ = run([command, *COMMANDS[command]], capsys)
    strip = lambda t: [ln for ln in t.splitlines() if not ln.startswith("# timestamp:")]  # noqa: E731
    assert strip(a) == strip(b)


def test_sweep_writes_file_and_infers_json(tmp_path, capsys):
    out = tmp_path / "f.json"
    code, stdout, _ = run(["sweep-fidelity", "--mu", "0.55", *SMALL, "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 25
    assert doc["meta"]["command"] == "sweep-fidelity"
    assert min(r["fidelity"] for r in doc["rows"]) >= 0.995


def test_json_writes_nan_as_null(capsys):
    code, out, _ = run(["sweep-fidelity", "--mu", "1.0", *SMALL, "--format", "json"], capsys)
    assert code == 0
    rows = json.loads(out)["rows"]
    assert all(r["fidelity"] is None and r["error"] for r in rows)


def test_solve_matches_library(capsys):
    code, out, _ = run(["solve", "--theta", "1.5708", "--mu", "0.68", "--s", "0.8"], capsys)
    assert code == 0
    doc = json.loads(out)
    pair = mke_pair(state_from_angles(StateParams(1.5708, 0.0, 0.68)), MeasurementRecord.normal_form(0.8))
    assert doc["exact"]["state"] == pair.exact.state.tolist()
    assert doc["approx"]["state"] == pair.approx.state.tolist()
    assert doc["exact"]["lambda2"] == pair.exact.lambda2
    assert doc["approx"]["lambda"] == pair.approx.lam
    assert doc["fidelity"] == pair.fidelity


def test_solve_json_round_trip(tmp_path, capsys):
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    assert main(["solve", "--theta", "0.9", "--phi", "0.4", "--mu", "0.8", "--s", "-0.3",
                 "--alpha", "0.25", "--out", str(first)]) == 0
    assert main(["solve", "--from-json", str(first), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_solve_degrees(capsys):
    _, rad, _ = run(["solve", "--theta", str(math.pi / 3), "--mu", "0.7", "--s", "0.2"], capsys)
    _, deg, _ = run(["solve", "--theta", "60", "--mu", "0.7", "--s", "0.2", "--degrees"], capsys)
    a, b = json.loads(rad), json.loads(deg)
    assert a["fidelity"] == pytest.approx(b["fidelity"], abs=1e-14)


def test_solve_general_observable(capsys):
    code, out, _ = run(["solve", "--bloch", "0.3", "0.2", "0.1", "--observable", "1", "0", "2", "0",
                        "--mean", "1.5"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["normal_form"]["scale"] == 2.0
    assert doc["exact"]["state"][1] == pytest.approx(0.25, abs=1e-10)


@pytest.mark.parametrize("argv", [
    ["solve", "--theta", "1.0", "--mu", "0.3", "--s", "0.1"],
    ["solve", "--theta", "1.0", "--mu", "0.7"],
    ["solve", "--theta", "1.0", "--mu", "0.7", "--s", "1.5"],
    ["solve", "--bloch", "1", "1", "0", "--s", "0.1"],
    ["sweep-fidelity", "--mu", "0.4"],
    ["sweep-fidelity", "--mu", "0.7", "--s-max", "1.0"],
    ["sweep-fidelity", "--mu", "0.7", "--purity-clamp", "2"],
])
def test_usage_errors_exit_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2
    assert json.loads(out)["error"] == "usage"
    assert "error" in err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["sweep-fidelity"])
    assert info.value.code == 2


def test_solver_failure_exits_1(capsys):
    code, out, _ = run(["solve", "--theta", "1.0", "--mu", "1.0", "--s", "0.1"], capsys)
    assert code == 1
    rec = json.loads(out)
    assert rec["error"] == "prior-rank" and rec["solver"] == "exact"
    assert rec["meta"]["command"] == "solve"


def test_mke_seed_environment(monkeypatch, capsys):
    argv = ["purity-scatter", "--samples", "4"]
    monkeypatch.setenv("MKE_SEED", "11")
    _, env_out, _ = run(argv, capsys)
    monkeypatch.delenv("MKE_SEED")
    _, flag_out, _ = run([*argv, "--seed", "11"], capsys)
    _, default_out, _ = run(argv, capsys)
    body = lambda t: header_and_body(t)[1]  # noqa: E731
    assert body(env_out) == body(flag_out)
    assert body(env_out) != body(default_out)
    assert "# seed: 11" in env_out


def test_bad_mke_seed(monkeypatch, capsys):
    monkeypatch.setenv("MKE_SEED", "abc")
    code, _, _ = run(["purity-scatter", "--samples", "2"], capsys)
    assert code == 2


def test_oracle_check_exit_code(capsys):
    code, out, _ = run(["oracle-check", "--instances", "4", "--resolution", "100", "--seed", "7"], capsys)
    assert code == 0
    assert "# all_dominated: true" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qmke", "solve", "--theta", "0", "--mu", "0.9", "--s", "0.5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["fidelity"] == pytest.approx(1.0, abs=1e-9)
