import csv
import json

import numpy as np
import pytest

from gyrolim.cli import (EXIT_CONFIG, EXIT_DOMAIN, EXIT_OK, EXIT_SOLVER, RunConfig,
                         build_problem, main)
from gyrolim.gyrocenter import DIPOLE_Y0


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main(["run", "--out", str(out), *args])
    return code, out


def test_run_writes_trajectory_and_summary(tmp_path):
    code, out = run(tmp_path, "--s", "2", "--k2", "4", "--h", "0.4", "--t-end", "4")
    assert code == EXIT_OK
    rows = read_rows(out / "trajectory.csv")
    assert rows[0] == ["t", "y1", "y2", "y3", "y4", "R", "x3", "H", "H_drift"]
    assert len(rows) == 12
    for field in rows[1]:
        mantissa = field.lstrip("-").split("e")[0].replace(".", "")
        assert len(mantissa) >= 16
    first = np.array(rows[1], dtype=float)
    assert first[0] == 0.0 and np.array_equal(first[1:5], DIPOLE_Y0) and first[8] == 0.0
    s = json.loads((out / "summary.json").read_text())
    assert s["status"] == "ok" and s["method"] == [2, 2, 4]
    assert s["n_steps"] == 10 and len(s["final_state"]) == 4
    assert s["solver_stats"]["total_iterations"] > 0
    assert s["max_abs_drift"] == pytest.approx(
        max(abs(float(r[8])) for r in rows[1:]), rel=1e-12)


def test_summary_round_trip(tmp_path):
    code, first = run(tmp_path, "--s", "1", "--k2", "3", "--t-end", "2", name="a")
    assert code == EXIT_OK
    code, second = run(tmp_path, "--config", str(first / "summary.json"), name="b")
    assert code == EXIT_OK
    assert (first / "trajectory.csv").read_bytes() == (second / "trajectory.csv").read_bytes()
    a = json.loads((first / "summary.json").read_text())
    b = json.loads((second / "summary.json").read_text())
    for key in ("final_state", "max_abs_drift", "solver_stats", "n_steps", "method"):
        assert a[key] == b[key]


def test_zero_length_run(tmp_path):
    code, out = run(tmp_path, "--t-end", "0")
    assert code == EXIT_OK
    assert len(read_rows(out / "trajectory.csv")) == 2


def test_config_errors_listed_together(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"s": 0, "h": -1, "tol": 0, "problem": "dipole"}))
    code, _ = run(tmp_path, "--config", str(cfg))
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    for key in ("s:", "h:", "tol:"):
        assert key in err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"stepsize": 0.1}))
    assert run(tmp_path, "--config", str(cfg))[0] == EXIT_CONFIG
    assert "stepsize" in capsys.readouterr().err


def test_k_below_s_rejected(tmp_path):
    assert run(tmp_path, "--s", "3", "--k2", "2")[0] == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert run(tmp_path, "--config", str(tmp_path / "nope.json"))[0] == EXIT_CONFIG


def test_solver_failure_exit_code(tmp_path):
    code, out = run(tmp_path, "--s", "1", "--k2", "7", "--t-end", "4", "--max-iters", "2")
    assert code == EXIT_SOLVER
    s = json.loads((out / "summary.json").read_text())
    assert s["status"] == "failed" and s["failed_step"] == 1
    assert len(read_rows(out / "trajectory.csv")) == 2


def test_domain_error_exit_code(tmp_path):
    cfg = tmp_path / "origin.json"
    cfg.write_text(json.dumps({"problem": "custom", "field": "dipole", "y0": [0, 0, 0, 0.01]}))
    assert run(tmp_path, "--config", str(cfg))[0] == EXIT_DOMAIN


def test_custom_problem(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "custom", "field": "tokamak",
                               "y0": [1.05, 0.0, 0.0, 4e-4], "h": 100.0, "t_end": 1e3}))
    code, out = run(tmp_path, "--config", str(cfg))
    assert code == EXIT_OK
    assert len(read_rows(out / "trajectory.csv")) == 12
    assert run(tmp_path, "--problem", "custom")[0] == EXIT_CONFIG


def test_build_problem_defaults():
    p = build_problem(RunConfig(problem="dipole_electric"))
    assert p.model.potential is not None
    assert build_problem(RunConfig(problem="dipole")).y0 == tuple(DIPOLE_Y0)


def test_sweep_energy(tmp_path, capsys):
    out = tmp_path / "sw"
    code = main(["sweep", "--table", "energy", "--t-end", "4", "--out", str(out)])
    assert code == EXIT_OK
    rows = read_rows(out / "energy.csv")
    assert rows[0][:2] == ["s", "k"] and "max_energy_drift" in rows[0]
    assert len(rows) == 1 + 5 * 9
    na = [r for r in rows[1:] if r[2] == "n/a"]
    assert len(na) == 10
    data = json.loads((out / "energy.json").read_text())
    assert data["table"] == "energy" and len(data["cells"]) == 45
    assert len(capsys.readouterr().out.strip().splitlines()) == 45


def test_sweep_narrowing(tmp_path):
    out = tmp_path / "sw"
    code = main(["sweep", "--table", "energy", "--s", "2", "--k2", "5", "--t-end", "4",
                 "--out", str(out)])
    assert code == EXIT_OK
    assert len(read_rows(out / "energy.csv")) == 2


def test_sweep_empty_axis(tmp_path, capsys):
    cfg = tmp_path / "e.json"
    cfg.write_text(json.dumps({"table": "energy", "s_list": []}))
    code = main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    assert "s_list" in capsys.readouterr().err


def test_sweep_requires_table(tmp_path):
    assert main(["sweep", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_sweep_robustness_grid(tmp_path):
    cfg = tmp_path / "r.json"
    cfg.write_text(json.dumps({"table": "robustness", "methods": [[1, 1, 7]],
                               "solvers": ["blended"], "t_end": 1.0, "grid": [0.25, 0.5]}))
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rows = read_rows(out / "robustness.csv")
    header, row = rows[0], rows[1]
    assert float(row[header.index("h_max")]) == 0.5


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 6 and "[FAIL]" not in out


def test_selftest_detects_corrupted_constant(capsys):
    assert main(["selftest", "--corrupt-xi1", "0.3"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] tableau identities" in out
    assert out.count("[FAIL]") == 1
