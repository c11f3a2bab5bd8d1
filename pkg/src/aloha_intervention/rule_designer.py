"""Closed-form design of the optimal intervention rule for a fixed test period.

The designer picks, for every idle-signal count k, the device transmission
probability f(k) that minimizes expected intervention while keeping unilateral
deviation unprofitable.  Low idle counts are the strongest evidence of a
deviation (the likelihood ratio of the one-defects scenario against
all-cooperate falls monotonically in k), so the optimum is a threshold rule:
full intervention below a threshold count, one fractional entry at it, none
above.  Feasibility fails when even maximal deterrence cannot offset the gain
from deviating, which happens both for very short test periods (too little
information) and very long ones (too few punishable slots left).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import (
    SystemParams,
    nash_throughput,
    signal_pmf,
    throughputs,
)

#: Strict-positivity guard for the net deterrence coefficients; values that
#: round through zero must not flip the cutoff.
K0_GUARD = 1e-12

#: Largest tolerated excursion of the fractional level outside [0, 1] before
#: clamping; anything bigger indicates a bug, not rounding.
LEVEL_EXCURSION_TOL = 1e-9


class InternalConsistencyError(RuntimeError):
    """A quantity the closed form guarantees analytically came out wrong."""


@dataclass(frozen=True)
class InterventionRule:
    """Device policy: ``levels[k]`` is the transmission probability applied
    after observing k idle signals in ``test_period`` sensing slots."""

    test_period: int
    levels: np.ndarray

    def __post_init__(self) -> None:
        if self.test_period < 1:
            raise ValueError(f"test_period must be >= 1, got {self.test_period}")
        levels = np.array(self.levels, dtype=float)
        if levels.shape != (self.test_period + 1,):
            raise ValueError(
                f"rule needs {self.test_period + 1} levels, got shape {levels.shape}"
            )
        if np.any(levels < 0.0) or np.any(levels > 1.0):
            raise ValueError("every level must lie in [0, 1]")
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def constant(cls, test_period: int, level: float) -> "InterventionRule":
        return cls(test_period, np.full(test_period + 1, float(level)))


@dataclass(frozen=True)
class DesignOutcome:
    """Result of the design problem at one test period.

    ``cutoff_k0`` and ``feasibility_slack`` are recorded even when infeasible,
    for diagnostics; ``optimal_throughput`` then carries the all-defect
    fallback level.
    """

    feasible: bool
    rule: InterventionRule | None
    threshold_kbar: int | None
    cutoff_k0: int
    optimal_throughput: float
    constraint_gap: float | None
    feasibility_slack: float


def likelihood_ratio(params: SystemParams, k: int, t: int) -> float:
    """Relative probability of seeing k idle signals under one-defects versus
    all-cooperate:

        ((1-p_high)/(1-p_low))^k * ((1-q_d)/(1-q_c))^(t-k)

    with q_c, q_d the per-slot idle probabilities of the two scenarios.
    Strictly decreasing in k (small counts indicate defection), strictly
    increasing in t (longer sensing sharpens the signal).
    """
    if not 0 <= k <= t:
        raise ValueError(f"idle count k={k} out of range [0, {t}]")
    q_coop = (1.0 - params.p_low) ** params.n_users
    q_dev = (1.0 - params.p_low) ** (params.n_users - 1) * (1.0 - params.p_high)
    idle_factor = (1.0 - params.p_high) / (1.0 - params.p_low)
    busy_factor = (1.0 - q_dev) / (1.0 - q_coop)
    return idle_factor**k * busy_factor ** (t - k)


def deterrence_coeffs(params: SystemParams, t: int) -> np.ndarray:
    """Net deterrence per signal: tau_d * mu(k;t) - tau_c * lambda(k;t).

    Entry k is the expected deviation loss minus cooperation loss created by a
    unit of intervention on signal k (before the (T-t)/T discount).  Positive
    exactly where the likelihood ratio exceeds p_low/p_high.
    """
    tp = throughputs(params)
    lam = signal_pmf(params, t, "all_cooperate").probs
    mu = signal_pmf(params, t, "one_defects").probs
    return tp.defect * mu - tp.coop * lam


def cutoff_k0(params: SystemParams, t: int, guard: float = K0_GUARD) -> int:
    """Largest idle count whose punishment still deters deviation.

    Scans the net deterrence coefficients for the last strictly positive entry;
    ``guard`` keeps coefficients that round through zero from flipping the
    cutoff.  Always >= 0 because signal 0 carries likelihood ratio above 1.
    """
    return _cutoff_from_coeffs(deterrence_coeffs(params, t), guard)


def check_feasibility(params: SystemParams, t: int) -> tuple[bool, float]:
    """Whether any rule at test period t can sustain cooperation, plus the slack.

    The slack is the discounted maximal deterrence (every usable signal fully
    punished) minus the deviation gain tau_d - tau_c; feasible iff >= 0.
    """
    tp = throughputs(params)
    gain = tp.defect - tp.coop
    if t == params.horizon:
        # No punishable slots remain; skip the sums entirely.
        return False, -gain
    weight = (params.horizon - t) / params.horizon
    coeffs = deterrence_coeffs(params, t)
    k0 = cutoff_k0(params, t)
    slack = weight * float(coeffs[: k0 + 1].sum()) - gain
    return slack >= 0.0, slack


def design_rule(params: SystemParams, t: int) -> DesignOutcome:
    """Solve the design problem at test period t.

    When feasible, the unique optimum sets f(k) = 1 for k below the threshold
    count, a fractional value at the threshold chosen so the incentive
    constraint binds exactly, and 0 above it.  When the running deterrence sum
    hits the deviation gain exactly at some count, that count is the threshold
    and its entry is the fractional one with value 1.  When infeasible, the
    throughput falls back to the all-defect level.
    """
    if not 1 <= t <= params.horizon:
        raise ValueError(f"test period must lie in [1, {params.horizon}], got {t}")
    tp = throughputs(params)
    gain = tp.defect - tp.coop
    coeffs = deterrence_coeffs(params, t)
    k0 = _cutoff_from_coeffs(coeffs)

    if t == params.horizon:
        return DesignOutcome(
            feasible=False,
            rule=None,
            threshold_kbar=None,
            cutoff_k0=k0,
            optimal_throughput=nash_throughput(params),
            constraint_gap=None,
            feasibility_slack=-gain,
        )

    weight = (params.horizon - t) / params.horizon
    running = np.cumsum(coeffs[: k0 + 1])
    slack = weight * float(running[-1]) - gain
    if slack < 0.0:
        return DesignOutcome(
            feasible=False,
            rule=None,
            threshold_kbar=None,
            cutoff_k0=k0,
            optimal_throughput=nash_throughput(params),
            constraint_gap=None,
            feasibility_slack=slack,
        )

    kbar = int(np.searchsorted(weight * running, gain, side="left"))
    levels = np.zeros(t + 1)
    levels[:kbar] = 1.0
    before = float(running[kbar - 1]) if kbar > 0 else 0.0
    levels[kbar] = _fractional_level(gain / weight - before, coeffs[kbar])

    rule = InterventionRule(test_period=t, levels=levels)
    lam = signal_pmf(params, t, "all_cooperate").probs
    tau_star = params.n_users * (1.0 - weight * float(lam @ levels)) * tp.coop
    gap = weight * float(coeffs @ levels) - gain
    return DesignOutcome(
        feasible=True,
        rule=rule,
        threshold_kbar=kbar,
        cutoff_k0=k0,
        optimal_throughput=tau_star,
        constraint_gap=gap,
        feasibility_slack=slack,
    )


def constraint_gap(params: SystemParams, rule: InterventionRule) -> float:
    """Incentive-constraint residual of a rule: discounted deterrence minus the
    deviation gain.  Zero (within tolerance) at the optimum; negative means the
    rule fails to deter, positive means it over-punishes."""
    if rule.test_period > params.horizon:
        raise ValueError(
            f"rule test period {rule.test_period} exceeds horizon {params.horizon}"
        )
    tp = throughputs(params)
    weight = (params.horizon - rule.test_period) / params.horizon
    coeffs = deterrence_coeffs(params, rule.test_period)
    return weight * float(coeffs @ rule.levels) - (tp.defect - tp.coop)


def _cutoff_from_coeffs(coeffs: np.ndarray, guard: float = K0_GUARD) -> int:
    positive = np.nonzero(coeffs > guard)[0]
    if positive.size == 0:
        raise InternalConsistencyError(
            "no strictly positive deterrence coefficient; signal 0 should always qualify"
        )
    return int(positive.max())


def _fractional_level(needed: float, coeff: float) -> float:
    """Fractional entry at the threshold: remaining constraint mass over the
    threshold coefficient.  Guaranteed to land in [0, 1] analytically; larger
    excursions indicate a bug rather than rounding."""
    value = needed / coeff
    if value < -LEVEL_EXCURSION_TOL or value > 1.0 + LEVEL_EXCURSION_TOL:
        raise InternalConsistencyError(
            f"threshold level {value!r} strays outside [0, 1] beyond {LEVEL_EXCURSION_TOL}"
        )
    return float(min(1.0, max(0.0, value)))
