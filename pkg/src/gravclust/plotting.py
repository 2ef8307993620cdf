"""Figure rendering for the report paths.

Each CLI report subcommand can render a matplotlib figure next to its
delimited output; these helpers do the drawing. Headless-safe: the Agg
backend is forced before pyplot loads.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import ScalingRow, SweepRow
from .model import Observation
from .windowed import SegmentStats

_RC = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _save(fig, path: str) -> None:
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)


def save_beta_sweep_figure(rows: list[SweepRow], path: str) -> None:
    """Concentration radius versus cluster count (and accuracy if present)."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        betas = [r.beta for r in rows]
        ax.plot(betas, [r.cluster_count for r in rows], "o-", color="tab:blue")
        ax.set_xlabel("beta")
        ax.set_ylabel("clusters", color="tab:blue")
        if betas and max(betas) / max(min(betas), 1e-12) > 100:
            ax.set_xscale("log")
        if any(r.accuracy is not None for r in rows):
            twin = ax.twinx()
            twin.plot(betas, [r.accuracy for r in rows], "s--", color="tab:red")
            twin.set_ylabel("accuracy", color="tab:red")
            twin.set_ylim(0, 1.05)
            twin.grid(False)
        _save(fig, path)


def save_scaling_figure(rows: list[ScalingRow], path: str) -> None:
    """Score-evaluation work and wall time versus stream size."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ns = [r.n for r in rows]
        ax.plot(ns, [r.work for r in rows], "o-", color="tab:blue", label="work")
        ax.set_xlabel("observations")
        ax.set_ylabel("score evaluations", color="tab:blue")
        twin = ax.twinx()
        twin.plot(ns, [r.elapsed_s for r in rows], "s--", color="tab:red", label="time")
        twin.set_ylabel("seconds", color="tab:red")
        twin.grid(False)
        _save(fig, path)


def save_dynamics_figure(history: list[SegmentStats], path: str, top: int = 8) -> None:
    """Per-cluster size over segments, for the `top` largest clusters."""
    totals: dict[int, int] = {}
    for stats in history:
        for label, entry in stats.per_cluster.items():
            totals[label] = totals.get(label, 0) + entry.n
    keep = sorted(sorted(totals), key=lambda lab: -totals[lab])[:top]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for label in keep:
            xs = [s.segment_index for s in history if label in s.per_cluster]
            ys = [s.per_cluster[label].n for s in history if label in s.per_cluster]
            ax.plot(xs, ys, "o-", label=f"cluster {label}")
        ax.set_xlabel("segment")
        ax.set_ylabel("observations in window")
        if keep:
            ax.legend(fontsize=7)
        _save(fig, path)


def save_cluster_figure(
    observations: list[Observation], assignments: dict[int, int], path: str
) -> None:
    """Scatter of the first two feature dimensions, colored by label."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        labels = sorted({assignments[o.obs_id] for o in observations})
        cmap = plt.get_cmap("tab20")
        for i, label in enumerate(labels):
            pts = np.array(
                [o.features[:2] for o in observations if assignments[o.obs_id] == label]
            )
            ax.scatter(pts[:, 0], pts[:, 1], s=8, color=cmap(i % 20), label=f"{label}")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        if len(labels) <= 12:
            ax.legend(fontsize=7, title="cluster")
        _save(fig, path)
