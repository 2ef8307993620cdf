"""Ground-truth matching, confusion counting, and sweep/scaling reports.

The matching is majority/plurality based: each predicted cluster maps to
the ground-truth group holding its majority, each group maps to the
predicted cluster holding its plurality. An observation sitting in a
cluster whose majority is some other group counts as a wrong inclusion
(FP); an observation outside its group's plurality cluster counts as a
wrong exclusion (FN). One misplaced observation is typically both. TN is
residual, so accuracy is well defined.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass

from .engine import StreamConfig, run_stream
from .errors import ContractViolation
from .model import Observation, observations_from_trajectories, FeatureConfig


@dataclass(frozen=True, slots=True)
class GroundTruth:
    """obs_id -> group id, as judged by an evaluator."""

    labels: dict[int, int]


@dataclass(frozen=True, slots=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int
    n_total: int

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n_total

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0


def _check_coverage(pred: dict[int, int], gt: GroundTruth) -> None:
    if set(pred) != set(gt.labels):
        missing = set(gt.labels) ^ set(pred)
        raise ContractViolation(
            f"prediction and ground truth must cover the same observations; "
            f"{len(missing)} ids differ"
        )


def _majority(counter: Counter) -> int:
    # Highest count wins; ties break toward the smaller id for determinism.
    return min(counter, key=lambda key: (-counter[key], key))


def match_clusters(
    pred: dict[int, int], gt: GroundTruth
) -> tuple[dict[int, int], dict[int, int]]:
    """(cluster -> majority group, group -> plurality cluster)."""
    _check_coverage(pred, gt)
    if not gt.labels:
        raise ContractViolation("ground truth is empty")
    by_cluster: dict[int, Counter] = {}
    by_group: dict[int, Counter] = {}
    for obs_id, cluster in pred.items():
        group = gt.labels[obs_id]
        by_cluster.setdefault(cluster, Counter())[group] += 1
        by_group.setdefault(group, Counter())[cluster] += 1
    cluster_to_group = {c: _majority(groups) for c, groups in sorted(by_cluster.items())}
    group_to_cluster = {g: _majority(clusters) for g, clusters in sorted(by_group.items())}
    return cluster_to_group, group_to_cluster


def confusion(pred: dict[int, int], gt: GroundTruth) -> ConfusionCounts:
    """Count TP/FP/FN/TN against the majority/plurality matching."""
    cluster_to_group, group_to_cluster = match_clusters(pred, gt)
    tp = 0
    wrong = 0  # observations that are FP, FN, or both
    fp = 0
    fn = 0
    for obs_id, cluster in pred.items():
        group = gt.labels[obs_id]
        included_wrong = cluster_to_group[cluster] != group
        excluded_wrong = cluster != group_to_cluster[group]
        if included_wrong:
            fp += 1
        if excluded_wrong:
            fn += 1
        if included_wrong or excluded_wrong:
            wrong += 1
        else:
            tp += 1
    n_total = len(pred)
    tn = n_total - tp - wrong
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn, n_total=n_total)


@dataclass(frozen=True, slots=True)
class SweepRow:
    beta: float
    cluster_count: int
    elapsed_s: float
    work: int
    accuracy: float | None = None


def beta_sweep(
    observations: list[Observation],
    betas: list[float],
    config: StreamConfig,
    gt: GroundTruth | None = None,
) -> list[SweepRow]:
    """Run the stream once per beta; each run is independent."""
    if not betas:
        raise ContractViolation("betas must be nonempty")
    rows = []
    for beta in betas:
        run_config = StreamConfig(
            beta=beta, mode=config.mode, rng_seed=config.rng_seed, distance=config.distance
        )
        t0 = time.perf_counter()
        state, assignments = run_stream(observations, run_config)
        elapsed = time.perf_counter() - t0
        accuracy = confusion(assignments, gt).accuracy if gt is not None else None
        rows.append(
            SweepRow(
                beta=beta,
                cluster_count=state.n_clusters,
                elapsed_s=elapsed,
                work=state.work_counter,
                accuracy=accuracy,
            )
        )
    return rows


@dataclass(frozen=True, slots=True)
class ScalingRow:
    n: int
    work: int
    elapsed_s: float


def scaling_report(
    n_values: list[int],
    k: int,
    config: StreamConfig,
    seed: int = 0,
    repeats: int = 1,
) -> list[ScalingRow]:
    """Work and wall time of the single sweep versus stream size, on
    well-separated scenes with exactly k paths and exactly n observations.

    elapsed_s is the minimum over `repeats` timed runs (work is identical
    across them); a warmup run absorbs first-touch costs.
    """
    from .synth import generate_exact_scene

    feature_config = FeatureConfig(selector="start_end")
    streams = []
    for n in n_values:
        trajectories, _ = generate_exact_scene(k, n, seed=seed)
        streams.append((n, observations_from_trajectories(trajectories, feature_config)))
    if streams:
        run_stream(streams[0][1], config)  # warmup
    rows = []
    for n, observations in streams:
        best = None
        work = 0
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            state, _ = run_stream(observations, config)
            elapsed = time.perf_counter() - t0
            work = state.work_counter
            best = elapsed if best is None else min(best, elapsed)
        rows.append(ScalingRow(n=n, work=work, elapsed_s=best))
    return rows
