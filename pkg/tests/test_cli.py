"""Command-line surface: flags, config files, formats, exit codes, artifacts."""

from __future__ import annotations

import json
from functools import partial

import numpy as np
import pytest

import aloha_intervention.cli as cli
from aloha_intervention import run_verification
from aloha_intervention.cli import (
    EXIT_INFEASIBLE,
    EXIT_IO,
    EXIT_OK,
    EXIT_VALIDATION,
    EXIT_VERIFICATION,
    main,
)

from conftest import TAU_STAR_18

REF_FLAGS = ["--n-users", "5", "--p-low", "0.2", "--p-high", "0.8", "--horizon", "100"]


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# design


def test_design_json_reports_threshold(capsys):
    code, out, _ = run(capsys, ["design", *REF_FLAGS, "--test-period", "18"])
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["kbar"] == 3
    assert payload["k0"] == 4
    assert payload["feasible"] is True
    assert 0.365 <= payload["tau_star"] <= 0.375
    assert payload["levels"][:3] == [1.0, 1.0, 1.0]
    assert all(level == 0.0 for level in payload["levels"][4:])


def test_design_infeasible_exit_code_and_fallback(capsys):
    code, out, _ = run(capsys, ["design", *REF_FLAGS, "--test-period", "1"])
    assert code == EXIT_INFEASIBLE
    payload = json.loads(out)
    assert payload["feasible"] is False
    assert payload["kbar"] is None and payload["levels"] is None
    assert payload["tau_star"] == pytest.approx(0.0064, abs=1e-12)


def test_design_rejects_malformed_probability(capsys):
    code, _, err = run(
        capsys,
        ["design", "--n-users", "5", "--p-low", "0.2", "--p-high", "1.2",
         "--horizon", "100", "--test-period", "18"],
    )
    assert code == EXIT_VALIDATION
    assert "p_high" in err


def test_design_requires_test_period(capsys):
    code, _, err = run(capsys, ["design", *REF_FLAGS])
    assert code == EXIT_VALIDATION
    assert "test-period" in err


def test_design_csv_roundtrip(capsys, tmp_path):
    target = tmp_path / "design.csv"
    code, _, _ = run(
        capsys,
        ["design", *REF_FLAGS, "--test-period", "18", "--format", "csv",
         "--output", str(target)],
    )
    assert code == EXIT_OK
    lines = target.read_text().splitlines()
    assert lines[0].startswith("# n_users=5")
    assert "kbar=3" in lines[1]
    assert lines[2] == "k,level"
    assert len(lines) == 3 + 19


# ---------------------------------------------------------------------------
# sweep


def test_sweep_csv_structure(capsys, tmp_path):
    target = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, ["sweep", *REF_FLAGS, "--output", str(target)])
    assert code == EXIT_OK
    raw = target.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "t,feasible,kbar,k0,tau_star,gap,slack"
    assert len(lines) == 1 + 100 + 1
    footer = lines[-1]
    assert footer.startswith("# best_t=18,")

    rows = {}
    for line in lines[1:-1]:
        cells = line.split(",")
        rows[int(cells[0])] = cells
    feasible_ts = {t for t, cells in rows.items() if cells[1] == "true"}
    assert feasible_ts == set(range(2, 21))
    taus = {t: float(cells[4]) for t, cells in rows.items()}
    best = max(feasible_ts, key=taus.get)
    assert best == 18
    # 17 significant digits round-trip exactly
    assert taus[18] == TAU_STAR_18
    for t in range(21, 101):
        assert rows[t][1] == "false"
        assert rows[t][2] == ""  # no threshold on infeasible rows


def test_sweep_json_matches_csv(capsys, tmp_path):
    csv_path = tmp_path / "sweep.csv"
    json_path = tmp_path / "sweep.json"
    run(capsys, ["sweep", *REF_FLAGS, "--output", str(csv_path)])
    run(capsys, ["sweep", *REF_FLAGS, "--format", "json", "--output", str(json_path)])
    payload = json.loads(json_path.read_text())
    assert payload["best_t"] == 18
    assert payload["best_throughput"] == TAU_STAR_18
    csv_taus = [
        float(line.split(",")[4])
        for line in csv_path.read_text().splitlines()[1:-1]
    ]
    json_taus = [row["tau_star"] for row in payload["rows"]]
    assert csv_taus == json_taus


def test_sweep_single_slot_horizon(capsys, tmp_path):
    figure = tmp_path / "empty.png"
    code, out, _ = run(
        capsys, ["sweep", "--n-users", "5", "--p-low", "0.2", "--p-high", "0.8",
                 "--horizon", "1", "--plot", str(figure)]
    )
    assert code == EXIT_INFEASIBLE
    lines = out.splitlines()
    assert len(lines) == 3  # header, one row, footer
    assert lines[1].startswith("1,false")
    # the figure still renders: just the cooperation reference line
    assert figure.exists() and figure.stat().st_size > 0


def test_sweep_renders_figure(capsys, tmp_path):
    figure = tmp_path / "sweep.png"
    code, _, _ = run(
        capsys,
        ["sweep", *REF_FLAGS, "--output", str(tmp_path / "sweep.csv"),
         "--plot", str(figure)],
    )
    assert code == EXIT_OK
    assert figure.exists() and figure.stat().st_size > 0


# ---------------------------------------------------------------------------
# simulate


def test_simulate_deterministic_output(capsys, tmp_path):
    argv = ["simulate", *REF_FLAGS, "--test-period", "18",
            "--replications", "2000", "--seed", "42"]
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    assert run(capsys, [*argv, "--output", str(first)])[0] == EXIT_OK
    assert run(capsys, [*argv, "--output", str(second)])[0] == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    payload = json.loads(first.read_text())
    assert payload["replications"] == 2000
    assert len(payload["per_user"]) == 5
    assert len(payload["idle_counts"]) == 19
    for row in payload["per_user"]:
        assert abs(row["mean"] - row["analytic"]) < 6 * row["stderr"]


def test_simulate_with_zero_rule_file(capsys, tmp_path):
    rule_path = tmp_path / "rule.json"
    rule_path.write_text(json.dumps({"test_period": 10, "levels": [0.0] * 11}))
    out_path = tmp_path / "sim.json"
    code, _, _ = run(
        capsys,
        ["simulate", *REF_FLAGS, "--test-period", "10", "--replications", "20000",
         "--seed", "11", "--rule-file", str(rule_path), "--output", str(out_path)],
    )
    assert code == EXIT_OK
    payload = json.loads(out_path.read_text())
    total = payload["total_throughput"]
    assert total["analytic"] == pytest.approx(0.4096, abs=1e-12)
    assert abs(total["mean"] - 0.4096) < 5 * total["stderr"]
    assert payload["device_level"]["analytic"] == 0.0


def test_simulate_rule_file_length_mismatch(capsys, tmp_path):
    rule_path = tmp_path / "rule.json"
    rule_path.write_text(json.dumps({"test_period": 10, "levels": [0.0] * 5}))
    code, _, err = run(
        capsys,
        ["simulate", *REF_FLAGS, "--test-period", "10", "--replications", "10",
         "--seed", "1", "--rule-file", str(rule_path)],
    )
    assert code == EXIT_VALIDATION
    assert "levels" in err


def test_simulate_rule_file_period_mismatch(capsys, tmp_path):
    rule_path = tmp_path / "rule.json"
    rule_path.write_text(json.dumps({"test_period": 9, "levels": [0.0] * 10}))
    code, _, _ = run(
        capsys,
        ["simulate", *REF_FLAGS, "--test-period", "10", "--replications", "10",
         "--seed", "1", "--rule-file", str(rule_path)],
    )
    assert code == EXIT_VALIDATION


def test_simulate_infeasible_period_needs_rule(capsys):
    code, _, err = run(
        capsys,
        ["simulate", *REF_FLAGS, "--test-period", "1", "--replications", "10",
         "--seed", "1"],
    )
    assert code == EXIT_INFEASIBLE
    assert "rule-file" in err


def test_simulate_requires_seed(capsys):
    code, _, _ = run(
        capsys,
        ["simulate", *REF_FLAGS, "--test-period", "18", "--replications", "10"],
    )
    assert code == EXIT_VALIDATION


def test_simulate_csv_format(capsys):
    code, out, _ = run(
        capsys,
        ["simulate", *REF_FLAGS, "--test-period", "18", "--replications", "500",
         "--seed", "2", "--format", "csv"],
    )
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "quantity,index,estimate,stderr,analytic"
    quantities = {line.split(",")[0] for line in lines[1:]}
    assert quantities == {"payoff", "payoff_total", "device_level", "idle_count"}


def test_simulate_renders_figure(capsys, tmp_path):
    figure = tmp_path / "hist.png"
    code, _, _ = run(
        capsys,
        ["simulate", *REF_FLAGS, "--test-period", "18", "--replications", "500",
         "--seed", "3", "--output", str(tmp_path / "sim.json"), "--plot", str(figure)],
    )
    assert code == EXIT_OK
    assert figure.exists() and figure.stat().st_size > 0


# ---------------------------------------------------------------------------
# verify


def test_verify_passes_on_reference_params(capsys):
    code, out, _ = run(capsys, ["verify", *REF_FLAGS])
    assert code == EXIT_OK
    assert "verification: PASS (5/5 checks)" in out
    assert out.count("PASS") == 6


def test_verify_rejects_invalid_params(capsys):
    code, _, _ = run(
        capsys, ["verify", "--n-users", "5", "--p-low", "0.9", "--p-high", "0.2",
                 "--horizon", "10"]
    )
    assert code == EXIT_VALIDATION


def test_verify_fails_with_injected_fault(capsys, monkeypatch):
    from test_verification import perturbed_designer

    monkeypatch.setattr(
        cli, "run_verification", partial(run_verification, designer=perturbed_designer)
    )
    code, out, _ = run(capsys, ["verify", *REF_FLAGS])
    assert code == EXIT_VERIFICATION
    assert "FAIL" in out


def test_verify_writes_report_file(capsys, tmp_path):
    report = tmp_path / "report.json"
    code, _, _ = run(capsys, ["verify", *REF_FLAGS, "--output", str(report)])
    assert code == EXIT_OK
    payload = json.loads(report.read_text())
    assert payload["passed"] is True
    assert len(payload["checks"]) == 5

    csv_report = tmp_path / "report.csv"
    code, _, _ = run(
        capsys, ["verify", *REF_FLAGS, "--format", "csv", "--output", str(csv_report)]
    )
    assert code == EXIT_OK
    lines = csv_report.read_text().splitlines()
    assert lines[0] == "name,passed,worst_residual,detail"
    assert len(lines) == 6


# ---------------------------------------------------------------------------
# config files and I/O


def test_config_file_supplies_params(capsys, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "n_users": 5, "p_low": 0.2, "p_high": 0.8, "horizon": 100, "test_period": 18,
    }))
    code, out, _ = run(capsys, ["design", "--config", str(config)])
    assert code == EXIT_OK
    assert json.loads(out)["kbar"] == 3


def test_flags_override_config_file(capsys, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "n_users": 5, "p_low": 0.2, "p_high": 0.8, "horizon": 100, "test_period": 2,
    }))
    code, out, _ = run(
        capsys, ["design", "--config", str(config), "--test-period", "18"]
    )
    assert code == EXIT_OK
    assert json.loads(out)["kbar"] == 3


def test_unknown_config_key_rejected(capsys, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "n_users": 5, "p_low": 0.2, "p_high": 0.8, "horizon": 100, "test_perod": 18,
    }))
    code, _, err = run(capsys, ["design", "--config", str(config)])
    assert code == EXIT_VALIDATION
    assert "test_perod" in err


def test_missing_params_rejected(capsys):
    code, _, err = run(capsys, ["design", "--n-users", "5", "--test-period", "18"])
    assert code == EXIT_VALIDATION
    assert "p_low" in err


def test_missing_config_file_is_io_error(capsys, tmp_path):
    code, _, _ = run(
        capsys, ["design", *REF_FLAGS, "--test-period", "18",
                 "--config", str(tmp_path / "nope.json")]
    )
    assert code == EXIT_IO


def test_unwritable_output_is_io_error(capsys, tmp_path):
    code, _, _ = run(
        capsys,
        ["sweep", *REF_FLAGS, "--output", str(tmp_path / "missing" / "out.csv")],
    )
    assert code == EXIT_IO


def test_unknown_flag_is_validation_error(capsys):
    code, _, _ = run(capsys, ["design", "--frobnicate", "1"])
    assert code == EXIT_VALIDATION


def test_non_integer_config_value_rejected(capsys, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "n_users": 5.5, "p_low": 0.2, "p_high": 0.8, "horizon": 100, "test_period": 18,
    }))
    code, _, _ = run(capsys, ["design", "--config", str(config)])
    assert code == EXIT_VALIDATION
