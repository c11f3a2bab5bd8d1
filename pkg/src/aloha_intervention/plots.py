"""Figure rendering for the CLI report paths.

Figures are written straight to files (format from the extension); the Agg
backend keeps this usable on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core_model import SignalPmf
from .monte_carlo_sim import SimEstimate
from .period_sweeper import SweepResult


def render_sweep_figure(result: SweepResult, path: str | Path) -> Path:
    """Optimal throughput against the test period, with the full-cooperation
    reference as a dotted line and the best period marked."""
    ts = [t for t, o in result.rows if o.feasible]
    taus = [o.optimal_throughput for _, o in result.rows if o.feasible]

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    if ts:
        ax.plot(ts, taus, marker="o", ms=4, lw=1.2, label="optimal throughput")
    ax.axhline(
        result.coop_reference,
        ls=":",
        color="k",
        lw=1.0,
        label="full cooperation",
    )
    if result.best_t is not None and result.best_throughput is not None:
        ax.plot(
            [result.best_t],
            [result.best_throughput],
            marker="*",
            ms=13,
            color="tab:red",
            ls="none",
            label=f"best: t = {result.best_t}",
        )
    ax.set_xlabel("test period t (slots)")
    ax.set_ylabel("total throughput (packets/slot)")
    ax.set_title(
        f"N = {result.params.n_users}, p_low = {result.params.p_low:g}, "
        f"p_high = {result.params.p_high:g}, T = {result.params.horizon}"
    )
    ax.legend(loc="lower right", frameon=False)
    out = Path(path)
    fig.savefig(out, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return out


def render_simulation_figure(
    estimate: SimEstimate, analytic: SignalPmf, path: str | Path
) -> Path:
    """Empirical idle-count histogram against the analytic pmf."""
    counts = np.arange(estimate.idle_count_histogram.size)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.bar(
        counts,
        estimate.idle_count_histogram,
        width=0.8,
        alpha=0.55,
        label=f"simulated ({estimate.replications_used:,} periods)",
    )
    ax.plot(counts, analytic.probs, marker="o", ms=4, lw=1.0, color="k", label="analytic")
    ax.set_xlabel("idle signals k")
    ax.set_ylabel("frequency")
    ax.legend(frameon=False)
    out = Path(path)
    fig.savefig(out, bbox_inches="tight", dpi=150)
    plt.close(fig)
    return out
