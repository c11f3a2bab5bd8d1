"""Intervention-based incentive design for slotted random access.

A device that senses the shared channel for a test period and then jams with a
signal-dependent probability can make cooperative transmission rates
self-enforcing.  This package provides the closed-form designer for the
optimal intervention rule, an independent LP oracle to certify it, a sweep
over test periods, and a slot-level Monte Carlo simulator, all behind one CLI.
"""

from .core_model import (
    ActionProfile,
    SignalPmf,
    SystemParams,
    Throughputs,
    binomial_pmf,
    expected_device_level,
    expected_payoff,
    idle_probability,
    is_canonical_p_low,
    nash_throughput,
    signal_pmf,
    stage_payoff,
    throughputs,
)
from .lp_oracle import LpInstance, OracleSolution, build_instance, certify, solve_greedy
from .monte_carlo_sim import (
    DeviationComparison,
    PeriodRecord,
    SimConfig,
    SimEstimate,
    compare_deviation,
    estimate,
    replication_stream,
    run_period,
)
from .period_sweeper import SweepResult, efficiency_loss, kbar_schedule, sweep
from .rule_designer import (
    DesignOutcome,
    InternalConsistencyError,
    InterventionRule,
    check_feasibility,
    constraint_gap,
    cutoff_k0,
    design_rule,
    likelihood_ratio,
)
from .verification import CheckResult, run_verification

__version__ = "0.1.0"

__all__ = [
    "ActionProfile",
    "CheckResult",
    "DesignOutcome",
    "DeviationComparison",
    "InternalConsistencyError",
    "InterventionRule",
    "LpInstance",
    "OracleSolution",
    "PeriodRecord",
    "SignalPmf",
    "SimConfig",
    "SimEstimate",
    "SweepResult",
    "SystemParams",
    "Throughputs",
    "binomial_pmf",
    "build_instance",
    "certify",
    "check_feasibility",
    "compare_deviation",
    "constraint_gap",
    "cutoff_k0",
    "design_rule",
    "efficiency_loss",
    "estimate",
    "expected_device_level",
    "expected_payoff",
    "idle_probability",
    "is_canonical_p_low",
    "kbar_schedule",
    "likelihood_ratio",
    "nash_throughput",
    "replication_stream",
    "run_period",
    "run_verification",
    "signal_pmf",
    "solve_greedy",
    "stage_payoff",
    "sweep",
    "throughputs",
]
