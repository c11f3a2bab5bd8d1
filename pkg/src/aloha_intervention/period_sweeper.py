"""Sweep of the design problem over every admissible test period.

Evaluates the optimal throughput tau*(t) for t = 1..horizon and locates the
best test period.  The curve is non-monotonic in general: longer sensing
sharpens the idle-count statistics but shrinks the punishable remainder of the
period, so the optimum balances the two.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core_model import SystemParams, throughputs
from .rule_designer import DesignOutcome, design_rule


@dataclass(frozen=True)
class SweepResult:
    """Per-period design outcomes plus the argmax over feasible periods.

    ``best_t`` is None when no period is feasible; ties go to the smallest t
    (fewer sensing slots).  ``coop_reference`` is the full-cooperation total
    throughput N tau_c, the upper bound any rule can approach.
    """

    params: SystemParams
    rows: tuple[tuple[int, DesignOutcome], ...]
    best_t: int | None
    best_throughput: float | None
    coop_reference: float


def sweep(params: SystemParams) -> SweepResult:
    """Design at every test period t = 1..horizon and pick the best feasible one."""
    rows = []
    best_t: int | None = None
    best_throughput: float | None = None
    for t in range(1, params.horizon + 1):
        outcome = design_rule(params, t)
        rows.append((t, outcome))
        if outcome.feasible and (
            best_throughput is None or outcome.optimal_throughput > best_throughput
        ):
            best_t = t
            best_throughput = outcome.optimal_throughput
    return SweepResult(
        params=params,
        rows=tuple(rows),
        best_t=best_t,
        best_throughput=best_throughput,
        coop_reference=params.n_users * throughputs(params).coop,
    )


def efficiency_loss(result: SweepResult) -> float:
    """Throughput given up to imperfect monitoring: N tau_c minus the best
    achievable tau*(t).  Errors out when the whole sweep is infeasible."""
    if result.best_t is None or result.best_throughput is None:
        raise ValueError("no feasible test period in the sweep")
    return result.coop_reference - result.best_throughput


def kbar_schedule(result: SweepResult) -> tuple[tuple[int, int], ...]:
    """Threshold count per feasible test period, ascending in t.

    The schedule is non-decreasing: longer test periods shift the optimal rule
    toward punishing larger idle counts.
    """
    schedule = []
    for t, outcome in result.rows:
        if outcome.feasible and outcome.threshold_kbar is not None:
            schedule.append((t, outcome.threshold_kbar))
    return tuple(schedule)
