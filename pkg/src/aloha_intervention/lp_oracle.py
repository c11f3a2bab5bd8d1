"""Independent LP route to the optimal intervention rule, for cross-checking.

The design problem is a box-constrained LP with a single inequality: minimize
the expected device transmission probability subject to deterrence covering
the deviation gain.  That is a continuous knapsack, so a greedy fill sorted by
constraint-per-objective ratio is exactly optimal.  The solver deliberately
never assumes the usable signals come first in index order; the closed-form
designer relies on that monotone structure, and keeping this route
order-agnostic means the two cannot share a structural bug.  ``certify``
checks any candidate solution against the LP optimality conditions through a
one-multiplier dual certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import SystemParams, signal_pmf, throughputs

#: Cost-effectiveness ratios closer than this are treated as tied and broken
#: by ascending signal index.
RATIO_TIE_TOL = 1e-12

#: Reduced-cost and activeness tolerance for certificates.
CERT_TOL = 1e-9

#: Levels within this distance of 0 or 1 count as integral in certificates.
LEVEL_TOL = 1e-9


@dataclass(frozen=True)
class LpInstance:
    """Data of the one-constraint LP over levels f(0..t) in [0, 1]:
    minimize objective_coeffs @ f subject to constraint_coeffs @ f >= rhs."""

    objective_coeffs: np.ndarray
    constraint_coeffs: np.ndarray
    rhs: float

    def __post_init__(self) -> None:
        obj = np.array(self.objective_coeffs, dtype=float)
        con = np.array(self.constraint_coeffs, dtype=float)
        if obj.shape != con.shape or obj.ndim != 1:
            raise ValueError(
                f"coefficient vectors must share one shape, got {obj.shape} and {con.shape}"
            )
        if np.any(obj <= 0.0):
            raise ValueError("objective coefficients must all be positive")
        if self.rhs <= 0.0:
            raise ValueError(f"rhs must be positive, got {self.rhs}")
        obj.setflags(write=False)
        con.setflags(write=False)
        object.__setattr__(self, "objective_coeffs", obj)
        object.__setattr__(self, "constraint_coeffs", con)


@dataclass(frozen=True)
class OracleSolution:
    """Greedy solve result with a dual multiplier as optimality certificate.

    Infeasible instances report the maximal-deterrence fill (every usable
    signal at 1) so callers can see how far the capacity falls short.
    """

    levels: np.ndarray
    objective: float
    feasible: bool
    certificate: float | None

    def __post_init__(self) -> None:
        levels = np.array(self.levels, dtype=float)
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)


def build_instance(params: SystemParams, t: int) -> LpInstance:
    """Assemble the LP at test period t from the signal pmfs and throughputs.

    The objective weights are the all-cooperate pmf (expected device level when
    nobody deviates); the constraint weights are the discounted net deterrence
    coefficients.  t = horizon is rejected: the constraint row degenerates to
    zero there.
    """
    if not 1 <= t < params.horizon:
        raise ValueError(
            f"test period must lie in [1, {params.horizon - 1}], got {t}"
        )
    tp = throughputs(params)
    lam = signal_pmf(params, t, "all_cooperate").probs
    mu = signal_pmf(params, t, "one_defects").probs
    weight = (params.horizon - t) / params.horizon
    return LpInstance(
        objective_coeffs=lam,
        constraint_coeffs=weight * (tp.defect * mu - tp.coop * lam),
        rhs=tp.defect - tp.coop,
    )


def solve_greedy(instance: LpInstance) -> OracleSolution:
    """Exact continuous-knapsack solve.

    Signals with nonpositive constraint coefficient are pinned at 0.  The rest
    are filled to 1 in order of descending constraint-per-objective ratio until
    the constraint binds, leaving at most one fractional level.  Infeasible
    when even the full fill cannot reach the rhs.
    """
    obj = instance.objective_coeffs
    con = instance.constraint_coeffs
    levels = np.zeros_like(obj)
    usable = np.nonzero(con > 0.0)[0]
    order = _ratio_order(con[usable] / obj[usable], usable)

    if float(con[usable].sum()) < instance.rhs:
        levels[usable] = 1.0
        return OracleSolution(
            levels=levels,
            objective=float(obj @ levels),
            feasible=False,
            certificate=None,
        )

    covered = 0.0
    marginal = int(order[0])
    for k in order:
        remaining = instance.rhs - covered
        if remaining <= 0.0:
            break
        marginal = int(k)
        if con[k] <= remaining:
            levels[k] = 1.0
            covered += con[k]
        else:
            levels[k] = remaining / con[k]
            covered = instance.rhs
    return OracleSolution(
        levels=levels,
        objective=float(obj @ levels),
        feasible=True,
        certificate=float(obj[marginal] / con[marginal]),
    )


def certify(instance: LpInstance, solution: OracleSolution) -> bool:
    """Verify LP optimality of a feasible solution via a dual multiplier.

    The multiplier y is the objective-per-constraint ratio at the fractional
    level (or at the marginal filled level when the solution is integral).
    Optimality then requires, within tolerance: filled levels no costlier than
    y per unit of deterrence, empty usable levels no cheaper, fractional levels
    exactly at y, nothing spent on non-deterring signals, and the constraint
    active (slack punishment is never optimal).
    """
    if not solution.feasible:
        raise ValueError("cannot certify an infeasible solution")
    obj = instance.objective_coeffs
    con = instance.constraint_coeffs
    lv = solution.levels
    if lv.shape != obj.shape:
        raise ValueError(f"solution shape {lv.shape} does not match instance {obj.shape}")

    if float(con @ lv) < instance.rhs - CERT_TOL:
        return False
    # No mass on signals that do not deter.
    if np.any(lv[con <= 0.0] > LEVEL_TOL):
        return False
    fractional = np.nonzero((lv > LEVEL_TOL) & (lv < 1.0 - LEVEL_TOL))[0]
    if fractional.size > 0:
        pivot = int(fractional[0])
    else:
        filled = np.nonzero((lv >= 1.0 - LEVEL_TOL) & (con > 0.0))[0]
        if filled.size == 0:
            return False
        # Marginal filled signal: the one with the worst (largest) price.
        pivot = int(filled[np.argmax(obj[filled] / con[filled])])
    y = obj[pivot] / con[pivot]
    if y < 0.0:
        return False

    ones = lv >= 1.0 - LEVEL_TOL
    zeros = (lv <= LEVEL_TOL) & (con > 0.0)
    frac = (lv > LEVEL_TOL) & (lv < 1.0 - LEVEL_TOL)
    if np.any(obj[ones] > y * con[ones] + CERT_TOL):
        return False
    if np.any(obj[zeros] < y * con[zeros] - CERT_TOL):
        return False
    if np.any(np.abs(obj[frac] - y * con[frac]) > CERT_TOL):
        return False
    # Complementary slackness on the constraint itself.
    return abs(float(con @ lv) - instance.rhs) <= CERT_TOL


def _ratio_order(ratios: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Indices sorted by descending ratio; runs of ratios within RATIO_TIE_TOL
    of their neighbor are re-sorted by ascending index for determinism."""
    if indices.size == 0:
        return indices
    order = np.argsort(-ratios, kind="stable")
    sorted_ratios = ratios[order]
    sorted_idx = indices[order]
    out = sorted_idx.copy()
    start = 0
    for pos in range(1, order.size + 1):
        boundary = (
            pos == order.size
            or sorted_ratios[pos - 1] - sorted_ratios[pos] > RATIO_TIE_TOL
        )
        if boundary:
            if pos - start > 1:
                out[start:pos] = np.sort(sorted_idx[start:pos])
            start = pos
    return out
