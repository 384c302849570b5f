"""Figure rendering for experiment reports.

Figures are written to files next to the delimited output; the CSV stays the
machine-readable boundary and the figures are a human-readable companion.
"""
from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .simulation import ChainExperimentResult, SimulationResult  # noqa: E402


def write_convergence_figure(rows: Sequence[SimulationResult], path: str) -> None:
    """Estimated agreement probability vs market size, with Wilson intervals
    and the closed-form lower bound."""
    ns = [r.n_schools for r in rows]
    p = [r.p_hat for r in rows]
    err_lo = [r.p_hat - r.ci_lo for r in rows]
    err_hi = [r.ci_hi - r.p_hat for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(ns, p, yerr=[err_lo, err_hi], fmt="o-", capsize=3,
                label="estimated agreement probability")
    bounds = [r.bound for r in rows]
    if all(b == b for b in bounds):  # skip when NaN (no constants supplied)
        ax.plot(ns, bounds, "s--", color="gray", label="theoretical lower bound")
    ax.set_xscale("log")
    ax.set_xlabel("schools (n)")
    ax.set_ylabel("P[quota and reserve matchings agree]")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_chain_figure(results: Sequence[ChainExperimentResult], path: str) -> None:
    """Distribution of rejection-chain lengths against the log-market bound."""
    lengths = [rec.chain_length for res in results for rec in res.records]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if lengths:
        bins = range(0, max(lengths) + 2)
        ax.hist(lengths, bins=bins, align="left", rwidth=0.85)
    if results:
        bound = results[0].summary.reference_bound
        ax.axvline(bound, color="crimson", linestyle="--",
                   label=f"lam*log(n)/(1-lam) = {bound:.2f}")
        ax.legend()
    ax.set_xlabel("schools changed per added reserved seat")
    ax.set_ylabel("count")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
