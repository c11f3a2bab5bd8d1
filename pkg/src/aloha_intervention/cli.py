"""Command-line front end: design, sweep, simulate, verify.

Parameters come from flags, from a JSON config file (flags win), or both.
Outputs are machine-readable (json or csv, UTF-8, LF endings, floats at 17
significant digits in csv so they round-trip exactly); sweep and simulate can
additionally render a figure next to the data with --plot.

Exit codes: 0 success, 1 validation error, 2 domain infeasibility,
3 verification failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import NoReturn

import numpy as np

from .core_model import (
    ActionProfile,
    SystemParams,
    expected_device_level,
    expected_payoff,
    idle_probability,
    signal_pmf,
)
from .monte_carlo_sim import SimConfig, SimEstimate, estimate
from .period_sweeper import SweepResult, sweep
from .rule_designer import DesignOutcome, InterventionRule, design_rule
from .verification import run_verification

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2
EXIT_VERIFICATION = 3
EXIT_IO = 4

_CONFIG_KEYS = {
    "n_users",
    "p_low",
    "p_high",
    "horizon",
    "test_period",
    "replications",
    "seed",
    "format",
    "output",
}

_DEFAULT_FORMAT = {"design": "json", "sweep": "csv", "simulate": "json", "verify": "json"}


class ConfigError(Exception):
    """Bad flags, config file, or rule file contents."""


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    command: str
    test_period: int | None
    replications: int | None
    seed: int | None
    format: str
    output: str | None
    rule_file: str | None
    plot: str | None


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors by default, which collides
    # with the infeasibility code; route usage errors to the validation code.
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="aloha-intervention",
        description="Design and validate intervention rules for a slotted random-access channel.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--n-users", type=int, default=None, help="number of users sharing the channel")
        p.add_argument("--p-low", type=float, default=None, help="cooperative transmission probability")
        p.add_argument("--p-high", type=float, default=None, help="aggressive transmission probability")
        p.add_argument("--horizon", type=int, default=None, help="period length in slots")
        p.add_argument("--config", default=None, help="JSON config file; flags override its values")
        p.add_argument("--format", choices=("csv", "json"), default=None, help="output format")
        p.add_argument("--output", default=None, help="output path (default: stdout)")

    p_design = sub.add_parser("design", help="optimal rule for one test period")
    add_common(p_design)
    p_design.add_argument("--test-period", type=int, default=None, help="sensing slots before intervention")

    p_sweep = sub.add_parser("sweep", help="optimal throughput across all test periods")
    add_common(p_sweep)
    p_sweep.add_argument("--plot", default=None, help="also render the throughput curve to this file")

    p_sim = sub.add_parser("simulate", help="Monte Carlo check of the analytic payoffs")
    add_common(p_sim)
    p_sim.add_argument("--test-period", type=int, default=None)
    p_sim.add_argument("--replications", type=int, default=None, help="simulated periods")
    p_sim.add_argument("--seed", type=int, default=None, help="random stream seed")
    p_sim.add_argument("--rule-file", default=None, help="JSON rule to simulate instead of the designed one")
    p_sim.add_argument("--plot", default=None, help="also render the idle-count histogram to this file")

    p_verify = sub.add_parser("verify", help="run the cross-validation battery")
    add_common(p_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION

    try:
        cfg = _resolve_config(args)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO

    command = {
        "design": cmd_design,
        "sweep": cmd_sweep,
        "simulate": cmd_simulate,
        "verify": cmd_verify,
    }[cfg.command]
    try:
        return command(cfg)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


# ---------------------------------------------------------------------------
# commands


def cmd_design(cfg: RunConfig) -> int:
    if cfg.test_period is None:
        raise ConfigError("design requires --test-period (or test_period in the config file)")
    outcome = design_rule(cfg.params, cfg.test_period)
    payload = _design_payload(cfg, outcome)
    if cfg.format == "json":
        _write_text(_as_json(payload), cfg.output)
    else:
        _write_text(_design_csv(payload), cfg.output)
    return EXIT_OK if outcome.feasible else EXIT_INFEASIBLE


def cmd_sweep(cfg: RunConfig) -> int:
    result = sweep(cfg.params)
    if cfg.format == "json":
        _write_text(_as_json(_sweep_payload(result)), cfg.output)
    else:
        _write_text(_sweep_csv(result), cfg.output)
    if cfg.plot is not None:
        from .plots import render_sweep_figure

        render_sweep_figure(result, cfg.plot)
    return EXIT_OK if result.best_t is not None else EXIT_INFEASIBLE


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.test_period is None or cfg.replications is None or cfg.seed is None:
        raise ConfigError("simulate requires --test-period, --replications and --seed")
    if cfg.rule_file is not None:
        rule = _load_rule(cfg.rule_file, cfg.test_period)
    else:
        outcome = design_rule(cfg.params, cfg.test_period)
        if not outcome.feasible or outcome.rule is None:
            print(
                f"error: no feasible rule at test period {cfg.test_period}; "
                "supply one with --rule-file",
                file=sys.stderr,
            )
            return EXIT_INFEASIBLE
        rule = outcome.rule

    profile = ActionProfile.all_cooperate(cfg.params)
    sim = estimate(SimConfig(cfg.params, rule, profile, cfg.replications, cfg.seed))
    payload = _simulate_payload(cfg, rule, profile, sim)
    if cfg.format == "json":
        _write_text(_as_json(payload), cfg.output)
    else:
        _write_text(_simulate_csv(payload), cfg.output)
    if cfg.plot is not None:
        from .plots import render_simulation_figure

        render_simulation_figure(
            sim, signal_pmf(cfg.params, rule.test_period, "all_cooperate"), cfg.plot
        )
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    checks = run_verification(cfg.params)
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{check.name}: {status} (worst residual {check.worst_residual:.3e}) {check.detail}")
    all_passed = all(c.passed for c in checks)
    print(f"verification: {'PASS' if all_passed else 'FAIL'} ({sum(c.passed for c in checks)}/{len(checks)} checks)")
    if cfg.output is not None:
        payload = {
            "params": _params_payload(cfg.params),
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "worst_residual": c.worst_residual,
                    "detail": c.detail,
                }
                for c in checks
            ],
            "passed": all_passed,
        }
        if cfg.format == "json":
            _write_text(_as_json(payload), cfg.output)
        else:
            lines = ["name,passed,worst_residual,detail"]
            for c in checks:
                detail = c.detail.replace(",", ";")
                lines.append(f"{c.name},{_csv_bool(c.passed)},{_fmt(c.worst_residual)},{detail}")
            _write_text("\n".join(lines) + "\n", cfg.output)
    return EXIT_OK if all_passed else EXIT_VERIFICATION


# ---------------------------------------------------------------------------
# config resolution


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config is not None:
        values = _load_config_file(args.config)

    def pick(key: str, flag_value):
        return flag_value if flag_value is not None else values.get(key)

    merged = {
        "n_users": pick("n_users", args.n_users),
        "p_low": pick("p_low", args.p_low),
        "p_high": pick("p_high", args.p_high),
        "horizon": pick("horizon", args.horizon),
        "test_period": pick("test_period", getattr(args, "test_period", None)),
        "replications": pick("replications", getattr(args, "replications", None)),
        "seed": pick("seed", getattr(args, "seed", None)),
        "format": pick("format", args.format) or _DEFAULT_FORMAT[args.command],
        "output": pick("output", args.output),
    }
    missing = [k for k in ("n_users", "p_low", "p_high", "horizon") if merged[k] is None]
    if missing:
        raise ConfigError(f"missing required parameters: {', '.join(missing)}")
    if merged["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be 'csv' or 'json', got {merged['format']!r}")
    if merged["output"] is not None and not isinstance(merged["output"], str):
        raise ConfigError(f"output must be a path string, got {merged['output']!r}")

    params = SystemParams(
        n_users=_as_int("n_users", merged["n_users"]),
        p_low=float(merged["p_low"]),
        p_high=float(merged["p_high"]),
        horizon=_as_int("horizon", merged["horizon"]),
    )
    return RunConfig(
        params=params,
        command=args.command,
        test_period=None if merged["test_period"] is None else _as_int("test_period", merged["test_period"]),
        replications=None if merged["replications"] is None else _as_int("replications", merged["replications"]),
        seed=None if merged["seed"] is None else _as_int("seed", merged["seed"]),
        format=merged["format"],
        output=merged["output"],
        rule_file=getattr(args, "rule_file", None),
        plot=getattr(args, "plot", None),
    )


def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as handle:
        try:
            values = json.load(handle)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file {path} is not valid JSON: {err}") from err
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(values) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return values


def _load_rule(path: str, test_period: int) -> InterventionRule:
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as err:
            raise ConfigError(f"rule file {path} is not valid JSON: {err}") from err
    if not isinstance(data, dict) or set(data) != {"test_period", "levels"}:
        raise ConfigError(
            f"rule file {path} must hold exactly the keys 'test_period' and 'levels'"
        )
    if data["test_period"] != test_period:
        raise ConfigError(
            f"rule file test period {data['test_period']} does not match --test-period {test_period}"
        )
    levels = np.asarray(data["levels"], dtype=float)
    if levels.shape != (test_period + 1,):
        raise ConfigError(
            f"rule file needs {test_period + 1} levels for test period {test_period}, "
            f"got {levels.size}"
        )
    return InterventionRule(test_period=test_period, levels=levels)


def _as_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(value)


# ---------------------------------------------------------------------------
# serialization


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _csv_bool(flag: bool) -> str:
    return "true" if flag else "false"


def _as_json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _write_text(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)


def _params_payload(params: SystemParams) -> dict:
    return {
        "n_users": params.n_users,
        "p_low": params.p_low,
        "p_high": params.p_high,
        "horizon": params.horizon,
    }


def _design_payload(cfg: RunConfig, outcome: DesignOutcome) -> dict:
    payload = _params_payload(cfg.params)
    payload.update(
        {
            "test_period": cfg.test_period,
            "feasible": outcome.feasible,
            "kbar": outcome.threshold_kbar,
            "k0": outcome.cutoff_k0,
            "tau_star": outcome.optimal_throughput,
            "constraint_gap": outcome.constraint_gap,
            "feasibility_slack": outcome.feasibility_slack,
            "levels": None if outcome.rule is None else outcome.rule.levels.tolist(),
        }
    )
    return payload


def _design_csv(payload: dict) -> str:
    meta_params = ",".join(
        f"{k}={payload[k]}" for k in ("n_users", "p_low", "p_high", "horizon", "test_period")
    )
    meta_outcome = ",".join(
        [
            f"feasible={_csv_bool(payload['feasible'])}",
            f"kbar={'' if payload['kbar'] is None else payload['kbar']}",
            f"k0={payload['k0']}",
            f"tau_star={_fmt(payload['tau_star'])}",
            f"constraint_gap={'' if payload['constraint_gap'] is None else _fmt(payload['constraint_gap'])}",
            f"feasibility_slack={_fmt(payload['feasibility_slack'])}",
        ]
    )
    lines = [f"# {meta_params}", f"# {meta_outcome}", "k,level"]
    if payload["levels"] is not None:
        for k, level in enumerate(payload["levels"]):
            lines.append(f"{k},{_fmt(level)}")
    return "\n".join(lines) + "\n"


def _sweep_payload(result: SweepResult) -> dict:
    rows = []
    for t, outcome in result.rows:
        rows.append(
            {
                "t": t,
                "feasible": outcome.feasible,
                "kbar": outcome.threshold_kbar,
                "k0": outcome.cutoff_k0,
                "tau_star": outcome.optimal_throughput,
                "gap": outcome.constraint_gap,
                "slack": outcome.feasibility_slack,
            }
        )
    return {
        "params": _params_payload(result.params),
        "rows": rows,
        "best_t": result.best_t,
        "best_throughput": result.best_throughput,
        "coop_reference": result.coop_reference,
    }


def _sweep_csv(result: SweepResult) -> str:
    lines = ["t,feasible,kbar,k0,tau_star,gap,slack"]
    for t, outcome in result.rows:
        kbar = "" if outcome.threshold_kbar is None else str(outcome.threshold_kbar)
        gap = "" if outcome.constraint_gap is None else _fmt(outcome.constraint_gap)
        lines.append(
            f"{t},{_csv_bool(outcome.feasible)},{kbar},{outcome.cutoff_k0},"
            f"{_fmt(outcome.optimal_throughput)},{gap},{_fmt(outcome.feasibility_slack)}"
        )
    best_t = "" if result.best_t is None else str(result.best_t)
    best = "" if result.best_throughput is None else _fmt(result.best_throughput)
    lines.append(
        f"# best_t={best_t},best_throughput={best},coop_reference={_fmt(result.coop_reference)}"
    )
    return "\n".join(lines) + "\n"


def _simulate_payload(
    cfg: RunConfig, rule: InterventionRule, profile: ActionProfile, sim: SimEstimate
) -> dict:
    params = cfg.params
    analytic_payoff = [
        expected_payoff(params, rule, profile, i) for i in range(params.n_users)
    ]
    analytic_pmf = signal_pmf(params, rule.test_period, "all_cooperate").probs
    per_user = [
        {
            "user": i,
            "mean": float(sim.per_user_payoff[i, 0]),
            "stderr": float(sim.per_user_payoff[i, 1]),
            "analytic": analytic_payoff[i],
        }
        for i in range(params.n_users)
    ]
    idle_counts = [
        {
            "k": k,
            "frequency": float(sim.idle_count_histogram[k]),
            "analytic": float(analytic_pmf[k]),
        }
        for k in range(rule.test_period + 1)
    ]
    payload = _params_payload(params)
    payload.update(
        {
            "test_period": rule.test_period,
            "replications": sim.replications_used,
            "seed": cfg.seed,
            "levels": rule.levels.tolist(),
            "per_user": per_user,
            "total_throughput": {
                "mean": sim.total_payoff[0],
                "stderr": sim.total_payoff[1],
                "analytic": float(sum(analytic_payoff)),
            },
            "device_level": {
                "mean": sim.mean_device_level[0],
                "stderr": sim.mean_device_level[1],
                "analytic": expected_device_level(rule, idle_probability(profile)),
            },
            "idle_counts": idle_counts,
        }
    )
    return payload


def _simulate_csv(payload: dict) -> str:
    lines = ["quantity,index,estimate,stderr,analytic"]
    for row in payload["per_user"]:
        lines.append(
            f"payoff,{row['user']},{_fmt(row['mean'])},{_fmt(row['stderr'])},{_fmt(row['analytic'])}"
        )
    total = payload["total_throughput"]
    lines.append(
        f"payoff_total,,{_fmt(total['mean'])},{_fmt(total['stderr'])},{_fmt(total['analytic'])}"
    )
    device = payload["device_level"]
    lines.append(
        f"device_level,,{_fmt(device['mean'])},{_fmt(device['stderr'])},{_fmt(device['analytic'])}"
    )
    for row in payload["idle_counts"]:
        lines.append(f"idle_count,{row['k']},{_fmt(row['frequency'])},,{_fmt(row['analytic'])}")
    return "\n".join(lines) + "\n"
