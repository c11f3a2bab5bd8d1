"""Slot-level Monte Carlo simulation of whole periods.

One replication plays out a full period: every user transmits independently
with its profile probability in each of the ``horizon`` slots; the device
counts idle slots over the first ``test_period`` of them, then transmits with
probability ``levels[count]`` in each remaining slot.  A user scores a packet
in a slot iff it transmits while every other station (users and device) stays
silent.  Replications are independent; payoffs are per-slot success rates.

Random-stream contract
----------------------
All randomness comes from the Philox counter-based generator (2^256 counter
space, far beyond the 2^64 minimum a seedable stream needs here), keyed by
``(seed, domain)`` packed into a 128-bit key (domain in the high word; domain
0 is the default estimate stream, domain 1 the deviation branch of
``compare_deviation``).  Each replication owns a fixed block of the counter
stream: replication r consumes uniforms [r * W, (r+1) * W) where
W = horizon * (n_users + 1) rounded up to a multiple of 4 (Philox emits four
64-bit words per counter tick).  Within the block the first horizon * n_users
uniforms are the user transmission draws in slot-major order and the next
horizon are the device draws.  Blocks make results bit-identical no matter how
replications are batched or distributed across workers, and aggregation is
index-ordered, so estimates are reproducible regardless of parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import ActionProfile, SystemParams
from .rule_designer import InterventionRule

#: Replications vectorized per batch; fixed so batching never depends on the
#: environment (the counter layout makes results batch-size independent anyway).
_BATCH = 8192

_WORD_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    """One simulation task: who plays what, under which rule, how many times."""

    params: SystemParams
    rule: InterventionRule
    profile: ActionProfile
    replications: int
    seed: int

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.rule.test_period > self.params.horizon:
            raise ValueError(
                f"rule test period {self.rule.test_period} exceeds horizon "
                f"{self.params.horizon}"
            )
        if len(self.profile.actions) != self.params.n_users:
            raise ValueError(
                f"profile has {len(self.profile.actions)} users, "
                f"params expect {self.params.n_users}"
            )


@dataclass(frozen=True)
class PeriodRecord:
    """Outcome of a single simulated period."""

    successes: np.ndarray
    idle_signals: int
    device_level: float


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo estimates with standard errors.

    ``per_user_payoff`` has one (mean, stderr) row per user; ``total_payoff``
    aggregates per-replication totals so its stderr honors the correlation
    between users sharing slots.
    """

    per_user_payoff: np.ndarray
    idle_count_histogram: np.ndarray
    mean_device_level: tuple[float, float]
    total_payoff: tuple[float, float]
    replications_used: int

    def __post_init__(self) -> None:
        per_user = np.array(self.per_user_payoff, dtype=float)
        hist = np.array(self.idle_count_histogram, dtype=float)
        if abs(hist.sum() - 1.0) > 1e-12:
            raise ValueError(f"histogram mass {hist.sum()!r} deviates from 1")
        if np.any(per_user[:, 1] < 0.0):
            raise ValueError("standard errors must be nonnegative")
        per_user.setflags(write=False)
        hist.setflags(write=False)
        object.__setattr__(self, "per_user_payoff", per_user)
        object.__setattr__(self, "idle_count_histogram", hist)


@dataclass(frozen=True)
class DeviationComparison:
    """Cooperation vs unilateral-deviation payoffs for the focal user, with the
    empirical incentive gap (cooperation minus deviation)."""

    coop_payoff: tuple[float, float]
    deviation_payoff: tuple[float, float]
    gap: tuple[float, float]
    coop_estimate: SimEstimate
    deviation_estimate: SimEstimate


def uniforms_per_period(params: SystemParams) -> int:
    """Counter-stream block width per replication (multiple of 4)."""
    needed = params.horizon * (params.n_users + 1)
    return ((needed + 3) // 4) * 4


def replication_stream(
    params: SystemParams, seed: int, replication: int, domain: int = 0
) -> np.random.Generator:
    """Generator positioned at the start of one replication's counter block.

    Drawing ``horizon * (n_users + 1)`` uniforms from it reproduces exactly the
    values the batched estimator uses for that replication.
    """
    if replication < 0:
        raise ValueError(f"replication index must be >= 0, got {replication}")
    width = uniforms_per_period(params)
    tick = replication * (width // 4)
    return np.random.Generator(np.random.Philox(key=_stream_key(seed, domain), counter=tick))


def run_period(config: SimConfig, rng_stream: np.random.Generator) -> PeriodRecord:
    """Simulate one full period from an explicit random stream.

    Draw order is fixed by the stream contract: user transmissions slot-major,
    then one device draw per slot (device draws during the test period are
    consumed but unused, keeping blocks aligned for any test period).
    """
    params = config.params
    horizon, n_users = params.horizon, params.n_users
    t = config.rule.test_period
    draws = rng_stream.random(horizon * (n_users + 1))
    user_draws = draws[: horizon * n_users].reshape(horizon, n_users)
    device_draws = draws[horizon * n_users :]

    transmit = user_draws < np.asarray(config.profile.actions)
    per_slot = transmit.sum(axis=1)
    idle_signals = int((per_slot[:t] == 0).sum())
    level = float(config.rule.levels[idle_signals])

    solo = transmit & (per_slot == 1)[:, None]
    solo[t:] &= (device_draws[t:] >= level)[:, None]
    return PeriodRecord(
        successes=solo.sum(axis=0),
        idle_signals=idle_signals,
        device_level=level,
    )


def estimate(config: SimConfig, *, stream_domain: int = 0) -> SimEstimate:
    """Estimate payoffs, the idle-count histogram, and the realized device level
    by averaging independent replications.

    Replications are processed in fixed-size batches over the counter stream;
    sums accumulate in replication order, so the result is deterministic in
    (config, seed) alone.
    """
    params = config.params
    horizon, n_users = params.horizon, params.n_users
    t = config.rule.test_period
    levels = config.rule.levels
    actions = np.asarray(config.profile.actions)
    width = uniforms_per_period(params)
    key = _stream_key(config.seed, stream_domain)
    total = config.replications

    payoff_sum = np.zeros(n_users)
    payoff_sumsq = np.zeros(n_users)
    total_sum = 0.0
    total_sumsq = 0.0
    level_sum = 0.0
    level_sumsq = 0.0
    counts = np.zeros(t + 1, dtype=np.int64)

    done = 0
    while done < total:
        batch = min(_BATCH, total - done)
        gen = np.random.Generator(
            np.random.Philox(key=key, counter=done * (width // 4))
        )
        draws = gen.random((batch, width))
        user_draws = draws[:, : horizon * n_users].reshape(batch, horizon, n_users)
        device_draws = draws[:, horizon * n_users : horizon * (n_users + 1)]

        transmit = user_draws < actions
        per_slot = transmit.sum(axis=2)
        idle = (per_slot[:, :t] == 0).sum(axis=1)
        applied = levels[idle]

        solo = transmit & (per_slot == 1)[:, :, None]
        solo[:, t:, :] &= (device_draws[:, t:] >= applied[:, None])[:, :, None]
        payoff = solo.sum(axis=1) / horizon

        payoff_sum += payoff.sum(axis=0)
        payoff_sumsq += (payoff**2).sum(axis=0)
        rep_total = payoff.sum(axis=1)
        total_sum += float(rep_total.sum())
        total_sumsq += float((rep_total**2).sum())
        level_sum += float(applied.sum())
        level_sumsq += float((applied**2).sum())
        counts += np.bincount(idle, minlength=t + 1)
        done += batch

    per_user = np.column_stack(
        [payoff_sum / total, _stderr(payoff_sum, payoff_sumsq, total)]
    )
    return SimEstimate(
        per_user_payoff=per_user,
        idle_count_histogram=counts / total,
        mean_device_level=(
            level_sum / total,
            float(_stderr(level_sum, level_sumsq, total)),
        ),
        total_payoff=(
            total_sum / total,
            float(_stderr(total_sum, total_sumsq, total)),
        ),
        replications_used=total,
    )


def compare_deviation(
    params: SystemParams,
    rule: InterventionRule,
    replications: int,
    seed: int,
) -> DeviationComparison:
    """Estimate the empirical incentive gap under a rule.

    Runs the all-cooperate profile and the one-defects profile (user 0
    deviates; users are symmetric) on separate stream domains, and reports
    cooperation minus deviation payoff for the focal user.  The runs are
    independent, so the gap stderr combines the two in quadrature.
    """
    coop = estimate(
        SimConfig(params, rule, ActionProfile.all_cooperate(params), replications, seed)
    )
    deviation = estimate(
        SimConfig(params, rule, ActionProfile.one_defects(params, 0), replications, seed),
        stream_domain=1,
    )
    coop_mean, coop_se = coop.per_user_payoff[0]
    dev_mean, dev_se = deviation.per_user_payoff[0]
    return DeviationComparison(
        coop_payoff=(float(coop_mean), float(coop_se)),
        deviation_payoff=(float(dev_mean), float(dev_se)),
        gap=(float(coop_mean - dev_mean), float(np.hypot(coop_se, dev_se))),
        coop_estimate=coop,
        deviation_estimate=deviation,
    )


def _stream_key(seed: int, domain: int) -> int:
    return ((domain & _WORD_MASK) << 64) | (seed & _WORD_MASK)


def _stderr(total, sumsq, n: int):
    if n < 2:
        return np.zeros_like(np.asarray(total, dtype=float))
    var = np.maximum(sumsq - total**2 / n, 0.0) / (n - 1)
    return np.sqrt(var / n)
