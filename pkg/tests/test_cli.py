from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from outlying_cmc.cli import emit_report, run
from outlying_cmc.counterexample import BumpParams, export_profile
from outlying_cmc.functional import SCAN_COLUMNS

A_K200 = -0.08039745841893713


def run_ok(argv, capsys):
    code = run(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# ------------------------------------------------------------ emit_report


def test_empty_scan_is_header_only():
    data = emit_report([], "csv", SCAN_COLUMNS).decode()
    assert data == ",".join(SCAN_COLUMNS) + "\n"


def test_single_row_round_trip():
    row = {"a": 0.1 + 0.2, "b": 3, "c": [1.5, -2.0], "d": "strict-min"}
    back = next(csv.DictReader(io.StringIO(emit_report(row, "csv").decode())))
    assert float(back["a"]) == row["a"]
    assert int(back["b"]) == 3
    assert [float(back["c_0"]), float(back["c_1"])] == row["c"]
    assert back["d"] == "strict-min"
    assert json.loads(emit_report(row, "json")) == row


def test_csv_and_json_encode_the_same_numbers():
    rng = np.random.default_rng(5)
    rows = [{"x": float(v), "y": float(np.exp(v))} for v in rng.standard_normal(20)]
    parsed_csv = list(csv.DictReader(io.StringIO(emit_report(rows, "csv").decode())))
    parsed_json = json.loads(emit_report(rows, "json"))
    for c, j in zip(parsed_csv, parsed_json):
        assert float(c["x"]) == j["x"] and float(c["y"]) == j["y"]


def test_json_keys_sorted_and_non_finite_become_null():
    doc = json.loads(emit_report({"z": 1.0, "a": float("nan")}, "json"))
    assert list(doc) == ["a", "z"] and doc["a"] is None


# ------------------------------------------------------------ commands


def test_verify_identities(capsys):
    code, out, _ = run_ok(["verify", "identities", "--tol", "1e-8"], capsys)
    assert code == 0
    assert out.strip() and all(line.startswith("PASS") for line in out.splitlines())


def test_verify_failure_exit_code(capsys):
    code, out, _ = run_ok(["verify", "identities", "--tol", "1e-300"], capsys)
    assert code == 1 and "FAIL" in out


def test_scan_zero_metric(tmp_path, capsys):
    path = tmp_path / "f.csv"
    code, _, _ = run_ok(["scan-f", "--metric", "zero", "--r-min", "1.2", "--r-max", "50",
                         "--samples", "200", "--out", str(path)], capsys)
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 200 and list(rows[0]) == list(SCAN_COLUMNS)
    assert all(float(r["F"]) < 0 and float(r["dF_radial"]) > 0 for r in rows)


def test_scan_is_thread_count_independent(tmp_path, capsys, monkeypatch):
    metric = tmp_path / "m.json"
    metric.write_text(json.dumps({"type": "isotropic", "c": -0.1}))
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("OUTLYING_CMC_THREADS", threads)
        path = tmp_path / f"scan{threads}.csv"
        assert run(["scan-f", "--metric", str(metric), "--samples", "12", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_outputs_are_byte_identical(tmp_path, capsys):
    blobs = []
    for i in range(2):
        path = tmp_path / f"solve{i}.json"
        assert run(["cmc", "solve", "--metric", "zero", "--lambda", "300", "--degree", "6",
                    "--out", str(path)]) == 0
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]
    doc = json.loads(blobs[0])
    assert list(doc) == sorted(doc)
    assert {"xi", "lambda", "degree", "area", "volume", "h", "residual", "rho_sigma", "mean_H",
            "outlying_a", "f_lambda", "iterations"} <= set(doc)


def test_report_reemits_csv(tmp_path, capsys):
    src = tmp_path / "r.json"
    src.write_text(json.dumps({"b": 2.5, "a": [1, 2]}))
    code, out, _ = run_ok(["report", "--input", str(src), "--format", "csv"], capsys)
    assert code == 0
    assert out.splitlines() == ["b,a_0,a_1", "2.5,1,2"]


def test_solve_with_exported_profile(tmp_path, capsys):
    prof = tmp_path / "prof.json"
    prof.write_text(json.dumps(export_profile(BumpParams(200, 2.0, 64.0), a_k=A_K200)))
    code, out, _ = run_ok(["cmc", "solve", "--metric", str(prof), "--xi0", "0,0,2",
                           "--lambda", "1000"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert abs(doc["volume"] / (4 / 3 * np.pi * 1e9) - 1) <= 1e-10


# ------------------------------------------------------------ exit codes


def test_usage_errors(capsys):
    assert run([]) == 2
    assert run(["nonsense"]) == 2
    assert run(["verify", "bogus-suite"]) == 2
    assert run(["cmc", "solve", "--xi0", "0,0"]) == 2
    assert run(["cmc", "solve", "--xi0", "0,0,0.5"]) == 2
    assert run(["scan-f", "--r-min", "3", "--r-max", "2"]) == 2
    assert run(["cmc", "solve", "--metric", '{"type": "wobbly"}']) == 2
    assert run(["report"]) == 2
    capsys.readouterr()


def test_config_diagnostics(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "samples": 3,\n  "bogus": 1\n}\n')
    assert run(["scan-f", "--config", str(bad)]) == 2
    assert f"{bad}:3:3: unknown key 'bogus'" in capsys.readouterr().err

    broken = tmp_path / "broken.json"
    broken.write_text('{\n  "samples": 3,\n  "tol":\n}\n')
    assert run(["scan-f", "--config", str(broken)]) == 2
    assert f"{broken}:4:1:" in capsys.readouterr().err

    neg = tmp_path / "neg.json"
    neg.write_text('{"tol": -1}')
    assert run(["verify", "identities", "--config", str(neg)]) == 2
    capsys.readouterr()


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"samples": 3, "r_max": 4.0}))
    code, out, _ = run_ok(["scan-f", "--config", str(cfg), "--samples", "5"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 5 and float(rows[-1]["r"]) == pytest.approx(4.0)


def test_solver_failure_exit_code(capsys):
    # a tolerance below roundoff cannot be met: Newton stalls
    assert run(["cmc", "solve", "--metric", "zero", "--lambda", "300", "--degree", "6",
                "--tol", "1e-30"]) == 3
    assert "SolverFailure" in capsys.readouterr().err


def test_io_failure_exit_code(tmp_path, capsys):
    assert run(["report", "--input", str(tmp_path / "missing.json")]) in (2, 3)
    out = tmp_path / "no_such_dir" / "x.csv"
    assert run(["scan-f", "--samples", "2", "--out", str(out)]) == 3
    capsys.readouterr()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "outlying_cmc.cli", "verify", "positivity"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS positivity" in proc.stdout
