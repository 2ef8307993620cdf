"""Sliding-window extension of the streaming engine.

The frame axis is cut into fixed-duration segments. New observations are
assigned against the carried-over clusters, so labels stay stable across
segments without any remapping. At each boundary, observations older than
one segment are retired (their statistics exactly removed), the remaining
in-window observations get exactly one resampling pass, and a per-segment
snapshot of every live cluster is recorded. The snapshot series is the
scene-dynamics output: how each path's mean, covariance, and volume move
over time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import ModelState, StreamConfig, assign, resample, unassign
from .errors import ContractViolation, InvalidParameter, NotFoundError, OrderingError
from .model import Observation


@dataclass(frozen=True)
class WindowConfig:
    """delta_t: segment duration in frames; stream: engine parameters."""

    delta_t: int
    stream: StreamConfig

    def __post_init__(self):
        if self.delta_t < 1:
            raise InvalidParameter(f"delta_t must be >= 1, got {self.delta_t}")


@dataclass(frozen=True, slots=True)
class SegmentCluster:
    n: int
    mean: np.ndarray
    covariance: np.ndarray | None


@dataclass(frozen=True, slots=True)
class SegmentStats:
    """Snapshot of cluster dynamics at the end of one segment."""

    segment_index: int
    per_cluster: dict[int, SegmentCluster]


class WindowedState:
    """Windowed clustering state: the carried model plus the retention buffer.

    Single-writer sequential; emitted SegmentStats are immutable snapshots.
    label_log keeps the last label every observation held, surviving
    retirement, so a full assignment report is available at the end.
    """

    def __init__(self, config: WindowConfig):
        self.config = config
        self.model = ModelState(rng_seed=config.stream.rng_seed)
        self.window: list[tuple[Observation, int]] = []
        self.current_segment: int = 0
        self.prev_boundary_frame: int = 0
        self.last_ingest_frame: int | None = None
        self.history: list[SegmentStats] = []
        self.label_log: dict[int, int] = {}

    @property
    def started(self) -> bool:
        return self.last_ingest_frame is not None

    def next_boundary(self) -> int:
        return (self.current_segment + 1) * self.config.delta_t


def ingest(state: WindowedState, obs: Observation) -> int:
    """Assign one observation against the carried clusters and buffer it.

    Arrival frames must be monotone (ties allowed). The first ingest pins
    the current segment to the observation's frame, so streams that start
    late do not emit snapshots for segments nobody observed.
    """
    if state.started and obs.arrival_frame < state.last_ingest_frame:
        raise OrderingError(
            f"arrival frames must be monotone; {obs.arrival_frame} after "
            f"{state.last_ingest_frame}"
        )
    if not state.started:
        state.current_segment = obs.arrival_frame // state.config.delta_t
        state.prev_boundary_frame = state.current_segment * state.config.delta_t
    state.last_ingest_frame = obs.arrival_frame
    label = assign(state.model, obs, state.config.stream, segment=state.current_segment)
    state.window.append((obs, label))
    state.label_log[obs.obs_id] = label
    return label


def _snapshot(state: WindowedState) -> SegmentStats:
    per_cluster = {}
    for label in state.model.labels_sorted():
        cluster = state.model.clusters[label]
        cov = cluster.covariance
        per_cluster[label] = SegmentCluster(
            n=cluster.n,
            mean=cluster.mean.copy(),
            covariance=None if cov is None else cov.copy(),
        )
    return SegmentStats(segment_index=state.current_segment, per_cluster=per_cluster)


def advance_segment(state: WindowedState) -> SegmentStats:
    """Close the current segment: retire, resample once, snapshot, advance.

    Observations that arrived before the previous boundary leave the model
    for good (one-segment retention). Every retained observation is then
    removed and re-placed once against the current clusters. The snapshot
    of the surviving clusters is recorded and returned.
    """
    if not state.started:
        raise ContractViolation("advance_segment called before any ingest")
    retained: list[tuple[Observation, int]] = []
    for obs, label in state.window:
        if obs.arrival_frame < state.prev_boundary_frame:
            unassign(state.model, obs)
        else:
            retained.append((obs, label))
    resampled: list[tuple[Observation, int]] = []
    for obs, _ in retained:
        _, new_label = resample(
            state.model, obs, state.config.stream, segment=state.current_segment
        )
        resampled.append((obs, new_label))
        state.label_log[obs.obs_id] = new_label
    state.window = resampled
    assert all(c.n > 0 for c in state.model.clusters.values())
    stats = _snapshot(state)
    state.history.append(stats)
    state.current_segment += 1
    state.prev_boundary_frame = state.current_segment * state.config.delta_t
    return stats


def run_windowed(
    observations: list[Observation],
    config: WindowConfig,
    state: WindowedState | None = None,
) -> tuple[WindowedState, dict[int, int]]:
    """Drive a whole stream through the window: advance at each boundary the
    stream crosses, ingest in order, and close the final segment.

    Pass a loaded state to resume a checkpointed run; resuming at a segment
    boundary reproduces the uninterrupted run exactly.
    """
    if state is None:
        state = WindowedState(config)
    ingested = 0
    for obs in observations:
        if state.started:
            while obs.arrival_frame >= state.next_boundary():
                advance_segment(state)
        ingest(state, obs)
        ingested += 1
    if ingested:
        advance_segment(state)
    return state, dict(state.label_log)


def dynamics_series(
    state: WindowedState, label: int
) -> list[tuple[int, int, np.ndarray]]:
    """(segment_index, count, mean) for every segment the cluster existed in.

    Gaps in the segment indices mean the cluster was absent. Raises for a
    label that was never issued.
    """
    if label < 1 or label >= state.model.next_label:
        raise NotFoundError(f"label {label} was never issued")
    series = []
    for stats in state.history:
        entry = stats.per_cluster.get(label)
        if entry is not None:
            series.append((stats.segment_index, entry.n, entry.mean))
    return series


def detect_shift(
    series: list[tuple[int, int, np.ndarray]],
    duration_axis_index: int,
    z_threshold: float = 2.0,
    min_history: int = 2,
    rel_floor: float = 0.02,
) -> list[int]:
    """Flag segments whose mean duration breaks from the running history.

    A segment is flagged when its duration component deviates from the
    running mean of the prior segments by more than z_threshold running
    standard deviations. The std is floored at rel_floor times the running
    mean so that near-constant histories do not flag measurement noise,
    and at least min_history prior segments are required.
    """
    if not series:
        return []
    if duration_axis_index >= series[0][2].shape[0]:
        raise InvalidParameter(
            f"features have no duration axis at index {duration_axis_index}; "
            f"the full selector is required"
        )
    durations = np.array([float(mean[duration_axis_index]) for _, _, mean in series])
    flags = []
    for t in range(len(series)):
        prior = durations[:t]
        if prior.shape[0] < min_history:
            continue
        m = float(prior.mean())
        s = max(float(prior.std()), rel_floor * abs(m))
        if abs(durations[t] - m) > z_threshold * s:
            flags.append(series[t][0])
    return flags
