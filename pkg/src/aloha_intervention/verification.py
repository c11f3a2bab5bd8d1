"""Cross-validation battery run by the ``verify`` command.

Each check pits an independent computation path against the closed-form
designer across the whole test-period sweep: the greedy LP oracle and its dual
certificates, the incentive constraint binding at every optimum, threshold
monotonicity, and monotonicity of the signal likelihood ratio.  The designer
is injectable so a deliberately broken one can be shown to fail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import lp_oracle
from .core_model import SystemParams
from .rule_designer import DesignOutcome, constraint_gap, design_rule, likelihood_ratio

#: Componentwise agreement tolerance between designer and oracle levels.
LEVEL_AGREEMENT_TOL = 1e-9

#: Objective agreement tolerance between designer and oracle.
OBJECTIVE_AGREEMENT_TOL = 1e-12

#: Incentive-gap tolerance at the optimum.
GAP_TOL = 1e-9

Designer = Callable[[SystemParams, int], DesignOutcome]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_residual: float
    detail: str


def run_verification(params: SystemParams, designer: Designer = design_rule) -> list[CheckResult]:
    """Run every check over t = 1..horizon and return one result per check."""
    outcomes = {t: designer(params, t) for t in range(1, params.horizon + 1)}
    feasible = [t for t, o in outcomes.items() if o.feasible]
    return [
        _check_oracle_equivalence(params, outcomes),
        _check_certificates(params, outcomes),
        _check_incentive_gap(params, outcomes),
        _check_kbar_monotone(outcomes, feasible),
        _check_likelihood_monotone(params),
    ]


def _check_oracle_equivalence(
    params: SystemParams, outcomes: dict[int, DesignOutcome]
) -> CheckResult:
    worst = 0.0
    mismatches = []
    for t, outcome in outcomes.items():
        if t == params.horizon:
            continue  # oracle rejects the degenerate period by construction
        instance = lp_oracle.build_instance(params, t)
        solution = lp_oracle.solve_greedy(instance)
        if solution.feasible != outcome.feasible:
            mismatches.append(f"t={t}: feasibility verdicts differ")
            worst = max(worst, 1.0)
            continue
        if not outcome.feasible:
            continue
        assert outcome.rule is not None
        level_gap = float(np.max(np.abs(solution.levels - outcome.rule.levels)))
        obj_gap = abs(
            solution.objective - float(instance.objective_coeffs @ outcome.rule.levels)
        )
        worst = max(worst, level_gap, obj_gap)
        if level_gap > LEVEL_AGREEMENT_TOL or obj_gap > OBJECTIVE_AGREEMENT_TOL:
            mismatches.append(f"t={t}: levels off by {level_gap:.3e}, objective by {obj_gap:.3e}")
    return CheckResult(
        name="oracle-equivalence",
        passed=not mismatches,
        worst_residual=worst,
        detail="; ".join(mismatches) or "closed form matches the LP oracle at every period",
    )


def _check_certificates(params: SystemParams, outcomes: dict[int, DesignOutcome]) -> CheckResult:
    failures = []
    checked = 0
    for t, outcome in outcomes.items():
        if not outcome.feasible or t == params.horizon:
            continue
        assert outcome.rule is not None
        instance = lp_oracle.build_instance(params, t)
        as_solution = lp_oracle.OracleSolution(
            levels=outcome.rule.levels,
            objective=float(instance.objective_coeffs @ outcome.rule.levels),
            feasible=True,
            certificate=None,
        )
        checked += 1
        if not lp_oracle.certify(instance, as_solution):
            failures.append(f"t={t}")
    return CheckResult(
        name="dual-certificates",
        passed=not failures,
        worst_residual=float(len(failures)),
        detail=(
            f"designed rules fail certification at t in {{{', '.join(failures)}}}"
            if failures
            else f"all {checked} feasible rules carry valid dual certificates"
        ),
    )


def _check_incentive_gap(params: SystemParams, outcomes: dict[int, DesignOutcome]) -> CheckResult:
    worst = 0.0
    for outcome in outcomes.values():
        if outcome.feasible and outcome.rule is not None:
            worst = max(worst, abs(constraint_gap(params, outcome.rule)))
    return CheckResult(
        name="incentive-gap",
        passed=worst <= GAP_TOL,
        worst_residual=worst,
        detail="incentive constraint binds at every feasible optimum",
    )


def _check_kbar_monotone(
    outcomes: dict[int, DesignOutcome], feasible: list[int]
) -> CheckResult:
    thresholds = [outcomes[t].threshold_kbar for t in sorted(feasible)]
    worst = 0
    for earlier, later in zip(thresholds, thresholds[1:]):
        if earlier is not None and later is not None:
            worst = max(worst, earlier - later)
    return CheckResult(
        name="threshold-monotone",
        passed=worst <= 0,
        worst_residual=float(worst),
        detail="threshold count never decreases with the test period",
    )


def _check_likelihood_monotone(params: SystemParams) -> CheckResult:
    worst = -np.inf
    ok = True
    for t in range(1, params.horizon + 1):
        ratios = np.array([likelihood_ratio(params, k, t) for k in range(t + 1)])
        # strict decrease in k, except where the ratio has underflowed to zero
        alive = ratios[:-1] > 0.0
        if np.any(alive):
            worst_k = float(np.max(np.diff(ratios)[alive]))
            if worst_k >= 0.0:
                ok = False
            worst = max(worst, worst_k)
        if t < params.horizon:
            grown = np.array([likelihood_ratio(params, k, t + 1) for k in range(t + 1)])
            if np.any(alive := ratios > 0.0):
                worst_t = float(np.max((ratios - grown)[alive]))
                if worst_t >= 0.0:
                    ok = False
                worst = max(worst, worst_t)
    return CheckResult(
        name="likelihood-ratio-monotone",
        passed=ok,
        worst_residual=float(worst),
        detail="likelihood ratio falls in the idle count and rises in the test period",
    )
