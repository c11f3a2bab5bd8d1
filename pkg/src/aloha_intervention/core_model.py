"""Analytic model of a slotted collision channel policed by an intervention device.

N saturated users share the channel; in every slot each user transmits with its
chosen probability and a packet goes through only when exactly one station
transmits.  A period lasts ``horizon`` slots.  During the first ``test_period``
slots the intervention device only senses the channel (idle vs busy); from then
on it transmits with a probability chosen from the observed idle-signal count,
destroying any user packet in slots where it is active.

Everything in this module is closed form and pure: payoffs, throughputs, and
the idle-count signal distributions under the two scenarios the designer cares
about (everybody cooperates at ``p_low`` / exactly one user defects to
``p_high``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np
from scipy.special import gammaln

if TYPE_CHECKING:
    from .rule_designer import InterventionRule

Scenario = Literal["all_cooperate", "one_defects"]

#: Unit-mass tolerance for signal pmfs.
PMF_SUM_TOL = 1e-12

#: Above this trial count the binomial recurrence switches to log space.
_RECURRENCE_MAX_TRIALS = 1000


@dataclass(frozen=True)
class SystemParams:
    """Game primitives: population size, the two transmission probabilities,
    and the period length in slots."""

    n_users: int
    p_low: float
    p_high: float
    horizon: int

    def __post_init__(self) -> None:
        if self.n_users < 2:
            raise ValueError(f"n_users must be >= 2, got {self.n_users}")
        if not 0.0 < self.p_low < self.p_high < 1.0:
            raise ValueError(
                "transmission probabilities must satisfy 0 < p_low < p_high < 1, "
                f"got p_low={self.p_low}, p_high={self.p_high}"
            )
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")


def is_canonical_p_low(params: SystemParams, tol: float = 1e-12) -> bool:
    """True when p_low equals 1/n_users, the symmetric throughput-optimal choice.

    Any p_low < p_high is accepted by :class:`SystemParams`; this helper lets
    callers flag non-canonical configurations.
    """
    return abs(params.p_low - 1.0 / params.n_users) <= tol


@dataclass(frozen=True)
class ActionProfile:
    """Per-user transmission probabilities, fixed for a whole period.

    Canonical profiles only mix p_low and p_high, but arbitrary probabilities
    are accepted so the simulator can exercise multi-deviation profiles.
    """

    actions: tuple[float, ...]

    def __post_init__(self) -> None:
        actions = tuple(float(a) for a in self.actions)
        if not actions:
            raise ValueError("profile must contain at least one user")
        if any(not 0.0 <= a <= 1.0 for a in actions):
            raise ValueError(f"every action must lie in [0, 1], got {actions}")
        object.__setattr__(self, "actions", actions)

    @classmethod
    def all_cooperate(cls, params: SystemParams) -> "ActionProfile":
        return cls((params.p_low,) * params.n_users)

    @classmethod
    def one_defects(cls, params: SystemParams, deviant: int = 0) -> "ActionProfile":
        if not 0 <= deviant < params.n_users:
            raise IndexError(f"deviant index {deviant} out of range")
        actions = [params.p_low] * params.n_users
        actions[deviant] = params.p_high
        return cls(tuple(actions))


@dataclass(frozen=True)
class Throughputs:
    """Per-user success rates: ``coop`` when everybody stays at p_low,
    ``defect`` for a unilateral deviant at p_high."""

    coop: float
    defect: float

    def __post_init__(self) -> None:
        if not 0.0 < self.coop < self.defect < 1.0:
            raise ValueError(
                f"throughputs must satisfy 0 < coop < defect < 1, got {self}"
            )


@dataclass(frozen=True)
class SignalPmf:
    """Distribution of the idle-signal count over a test period.

    ``probs[k]`` is the probability of observing exactly k idle slots out of
    ``test_period`` sensing slots.
    """

    test_period: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (self.test_period + 1,):
            raise ValueError(
                f"expected {self.test_period + 1} entries, got shape {probs.shape}"
            )
        if np.any(probs < 0.0):
            raise ValueError("pmf entries must be nonnegative")
        if abs(probs.sum() - 1.0) > PMF_SUM_TOL:
            raise ValueError(f"pmf mass {probs.sum()!r} deviates from 1 beyond {PMF_SUM_TOL}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)


def binomial_pmf(n: int, p: float) -> np.ndarray:
    """Pmf of the success count over n independent Bernoulli(p) trials.

    Computed by the multiplicative recurrence
    ``probs[k+1] = probs[k] * (n-k)/(k+1) * p/(1-p)`` (vectorized as a running
    product), which avoids explicit binomial coefficients.  Falls back to log
    space via ``gammaln`` when n is large or the anchor term (1-p)^n
    underflows, since the recurrence then loses the scale entirely.
    """
    if n < 0:
        raise ValueError(f"trial count must be nonnegative, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"success probability must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        probs = np.zeros(n + 1)
        probs[n if p == 1.0 else 0] = 1.0
        return probs
    anchor = (1.0 - p) ** n
    if n > _RECURRENCE_MAX_TRIALS or anchor == 0.0:
        k = np.arange(n + 1, dtype=float)
        log_probs = (
            gammaln(n + 1.0)
            - gammaln(k + 1.0)
            - gammaln(n - k + 1.0)
            + k * math.log(p)
            + (n - k) * math.log1p(-p)
        )
        probs = np.exp(log_probs)
        # gammaln rounding leaves the mass slightly off unit; renormalize.
        return probs / probs.sum()
    k = np.arange(1, n + 1, dtype=float)
    steps = (n - k + 1.0) / k * (p / (1.0 - p))
    probs = np.empty(n + 1)
    probs[0] = anchor
    probs[1:] = anchor * np.cumprod(steps)
    return probs


def idle_probability(profile: ActionProfile) -> float:
    """Probability that a slot stays idle: the product of (1 - a_i) over users."""
    return float(np.prod(1.0 - np.asarray(profile.actions)))


def idle_prob_all_cooperate(params: SystemParams) -> float:
    """Idle probability (1 - p_low)^N when every user cooperates."""
    return (1.0 - params.p_low) ** params.n_users


def idle_prob_one_defects(params: SystemParams) -> float:
    """Idle probability (1 - p_low)^(N-1) (1 - p_high) under a unilateral deviation."""
    return (1.0 - params.p_low) ** (params.n_users - 1) * (1.0 - params.p_high)


def throughputs(params: SystemParams) -> Throughputs:
    """Cooperation and unilateral-defection success rates.

    coop = p_low (1-p_low)^(N-1); defect = p_high (1-p_low)^(N-1).  Their ratio
    is exactly p_high/p_low because the idle factor cancels.
    """
    quiet_others = (1.0 - params.p_low) ** (params.n_users - 1)
    return Throughputs(coop=params.p_low * quiet_others, defect=params.p_high * quiet_others)


def nash_throughput(params: SystemParams) -> float:
    """Total throughput N p_high (1-p_high)^(N-1) at the all-defect equilibrium,
    the fallback level when no intervention rule can sustain cooperation."""
    return params.n_users * params.p_high * (1.0 - params.p_high) ** (params.n_users - 1)


def signal_pmf(params: SystemParams, test_period: int, scenario: Scenario) -> SignalPmf:
    """Idle-count distribution over ``test_period`` sensing slots.

    The count is binomial with per-slot idle probability determined by the
    scenario: all users at p_low, or exactly one deviating to p_high.
    """
    _check_test_period(params, test_period)
    if scenario == "all_cooperate":
        q = idle_prob_all_cooperate(params)
    elif scenario == "one_defects":
        q = idle_prob_one_defects(params)
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return SignalPmf(test_period=test_period, probs=binomial_pmf(test_period, q))


def stage_payoff(
    params: SystemParams,
    device_action: float,
    profile: ActionProfile,
    user: int,
    test_period: int,
) -> float:
    """Expected packets/slot for ``user`` when the device transmits with a fixed
    probability ``device_action`` during the post-test slots.

    Equals (1 - (T-t)/T * a0) * a_i * prod_{j != i} (1 - a_j): the device is
    silent during the t sensing slots, so only the (T-t)/T share of the period
    is degraded.
    """
    if not 0.0 <= device_action <= 1.0:
        raise ValueError(f"device_action must lie in [0, 1], got {device_action}")
    _check_test_period(params, test_period)
    alone = _solo_success_probability(params, profile, user)
    weight = (params.horizon - test_period) / params.horizon
    return (1.0 - weight * device_action) * alone


def expected_payoff(
    params: SystemParams,
    rule: "InterventionRule",
    profile: ActionProfile,
    user: int,
) -> float:
    """Expected packets/slot for ``user`` when the device follows ``rule``.

    Averages the stage payoff over the binomial idle-count distribution induced
    by the profile; the bracketed factor is 1 minus the discounted expected
    intervention level, so the payoff is non-increasing in every rule entry.
    """
    _check_test_period(params, rule.test_period)
    alone = _solo_success_probability(params, profile, user)
    weight = (params.horizon - rule.test_period) / params.horizon
    level = expected_device_level(rule, idle_probability(profile))
    return (1.0 - weight * level) * alone


def expected_device_level(rule: "InterventionRule", idle_prob: float) -> float:
    """Expected device transmission probability under ``rule`` when each sensing
    slot is idle with probability ``idle_prob``."""
    counts = binomial_pmf(rule.test_period, idle_prob)
    return float(counts @ rule.levels)


def _check_test_period(params: SystemParams, test_period: int) -> None:
    if not 1 <= test_period <= params.horizon:
        raise ValueError(
            f"test_period must lie in [1, {params.horizon}], got {test_period}"
        )


def _solo_success_probability(params: SystemParams, profile: ActionProfile, user: int) -> float:
    if len(profile.actions) != params.n_users:
        raise ValueError(
            f"profile has {len(profile.actions)} users, params expect {params.n_users}"
        )
    if not 0 <= user < params.n_users:
        raise IndexError(f"user index {user} out of range for {params.n_users} users")
    actions = np.asarray(profile.actions)
    others = np.prod(1.0 - np.delete(actions, user))
    return float(actions[user] * others)
