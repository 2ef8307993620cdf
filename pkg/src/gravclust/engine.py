"""Single-sweep incremental clustering engine.

Each observation is scored once, in arrival order, against the live
clusters. An existing cluster k at distance x with n_k members scores
e^(-x) * n_k; opening a new cluster scores e^(-beta). The ln(n_k) term
gives big clusters a larger effective capture radius, so the threshold for
joining the best cluster is x - ln(n_k) < beta. All scoring is done on log
scores: e^(-beta) underflows for beta beyond ~700, and argmax/sampling are
exact in the log domain.

Assignments are exactly reversible (unassign restores the running mean and
deviation accumulator), which is what the sliding-window mode builds on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation, InvalidParameter, OrderingError
from .model import Cluster, Observation, euclidean

MIN_BETA = 1e-6

# At score ties an observation prefers an existing cluster over opening a
# new one, and the lowest label among existing ones; boundary inputs then
# never spawn spurious clusters, and MAP runs are bit-reproducible.
TIE_RULE = "prefer-existing-lowest-label"


@dataclass(frozen=True)
class StreamConfig:
    """Engine parameters.

    beta: concentration radius; the implied concentration is e^(-beta).
    mode: "map" picks the argmax label, "gibbs" samples proportionally to
          the scores using the state's seeded generator.
    distance: pluggable distance callable; Euclidean by default.
    """

    beta: float
    mode: str = "map"
    rng_seed: int = 0
    distance: Callable[[np.ndarray, np.ndarray], float] = euclidean

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise InvalidParameter(f"beta must be positive and finite, got {self.beta}")
        if self.mode not in ("map", "gibbs"):
            raise InvalidParameter(f"mode must be 'map' or 'gibbs', got {self.mode!r}")


class ModelState:
    """Mutable clustering state: live clusters plus the assignment map.

    Single-writer sequential by contract (arrival order is semantic).
    Reads, including score(), never mutate. Labels start at 1, increase
    monotonically, and are never reused; work_counter counts cluster-score
    evaluations for complexity audits.
    """

    def __init__(self, rng_seed: int = 0):
        self.clusters: dict[int, Cluster] = {}
        self.assignments: dict[int, int] = {}
        self.features: dict[int, np.ndarray] = {}
        self.next_label: int = 1
        self.total_assigned: int = 0
        self.work_counter: int = 0
        self.rng = np.random.default_rng(rng_seed)

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def labels_sorted(self) -> list[int]:
        return sorted(self.clusters)

    def check_dimension(self, obs: Observation) -> None:
        if not self.clusters:
            return
        mean = next(iter(self.clusters.values())).mean
        if mean.shape != obs.features.shape:
            raise ContractViolation(
                f"observation dimension {obs.features.shape[0]} does not match "
                f"model dimension {mean.shape[0]}"
            )


def _log_scores(
    state: ModelState, obs: Observation, config: StreamConfig
) -> list[tuple[int | None, float]]:
    """Unnormalized log scores, new-cluster option first then labels ascending."""
    options: list[tuple[int | None, float]] = [(None, -config.beta)]
    for label in state.labels_sorted():
        cluster = state.clusters[label]
        x = config.distance(obs.features, cluster.mean)
        options.append((label, -x + math.log(cluster.n)))
    return options


def score(
    state: ModelState, obs: Observation, config: StreamConfig
) -> list[tuple[int | None, float]]:
    """Score one observation against the current state.

    Returns (label, log_score) pairs; label None is the new-cluster
    option. Scores are unnormalized (the shared constant cancels in both
    argmax and sampling). Pure: does not touch state or counters.
    """
    state.check_dimension(obs)
    return _log_scores(state, obs, config)


def _pick(
    options: list[tuple[int | None, float]], state: ModelState, config: StreamConfig
) -> int | None:
    if config.mode == "gibbs":
        logs = np.array([s for _, s in options])
        p = np.exp(logs - logs.max())
        p /= p.sum()
        return options[int(state.rng.choice(len(options), p=p))][0]
    # MAP: options are ordered new-first then ascending labels, so a strict
    # comparison keeps the lowest label on ties; an existing cluster beats
    # the new-cluster option at equality.
    best_label, best_score = options[0]
    for label, log_score in options[1:]:
        if log_score > best_score or (log_score == best_score and best_label is None):
            best_label, best_score = label, log_score
    return best_label


def _place(state: ModelState, obs: Observation, label: int | None, segment: int) -> int:
    if label is None:
        label = state.next_label
        state.next_label += 1
        state.clusters[label] = Cluster.singleton(label, obs.features, segment)
    else:
        state.clusters[label].add(obs.features)
    state.assignments[obs.obs_id] = label
    state.features[obs.obs_id] = obs.features
    state.total_assigned += 1
    return label


def assign(
    state: ModelState, obs: Observation, config: StreamConfig, segment: int = 0
) -> int:
    """Assign one observation, creating a new cluster if that wins.

    Adds exactly K (the number of existing clusters) to work_counter.
    """
    if obs.obs_id in state.assignments:
        raise ContractViolation(f"observation {obs.obs_id} is already assigned")
    state.check_dimension(obs)
    options = _log_scores(state, obs, config)
    state.work_counter += len(options) - 1
    return _place(state, obs, _pick(options, state, config), segment)


def unassign(state: ModelState, obs: Observation) -> int:
    """Remove an observation from its cluster, exactly downdating the stats.

    A cluster emptied by the removal is deleted; its label is never
    reissued. Returns the label the observation was removed from.
    """
    label = state.assignments.get(obs.obs_id)
    if label is None:
        raise ContractViolation(f"observation {obs.obs_id} is not assigned")
    cluster = state.clusters[label]
    cluster.remove(state.features[obs.obs_id])
    if cluster.n == 0:
        del state.clusters[label]
    del state.assignments[obs.obs_id]
    del state.features[obs.obs_id]
    state.total_assigned -= 1
    return label


def resample(state: ModelState, obs: Observation, config: StreamConfig, segment: int = 0) -> tuple[int, int]:
    """Remove one assigned observation and re-place it in a single step.

    The observation's own cluster is scored without it (n_k - 1, downdated
    mean), per the exclude-self posterior. If removal empties the cluster
    and the new-cluster option wins, the original label is kept: the
    singleton never observably dies, so stable configurations keep stable
    labels across resampling passes. Returns (old_label, new_label).
    """
    old_label = state.assignments.get(obs.obs_id)
    if old_label is None:
        raise ContractViolation(f"observation {obs.obs_id} is not assigned")
    x = state.features[obs.obs_id]
    cluster = state.clusters[old_label]
    cluster.remove(x)
    emptied = cluster.n == 0
    if emptied:
        del state.clusters[old_label]
    del state.assignments[obs.obs_id]
    del state.features[obs.obs_id]
    state.total_assigned -= 1

    options = _log_scores(state, obs, config)
    state.work_counter += len(options) - 1
    choice = _pick(options, state, config)
    if emptied and choice is None:
        # Re-instate the same singleton under its original label.
        state.clusters[old_label] = Cluster.singleton(old_label, obs.features, cluster.created_segment)
        state.assignments[obs.obs_id] = old_label
        state.features[obs.obs_id] = obs.features
        state.total_assigned += 1
        return old_label, old_label
    new_label = _place(state, obs, choice, segment)
    return old_label, new_label


def estimate_beta(max_radius: float, n_k: int) -> float:
    """Initial concentration radius from a distribution radius and a typical
    cluster size: max_radius - ln(n_k).

    The infinitesimal margin above the periphery is dropped (it is
    negligible against max_radius).
    """
    if n_k < 1:
        raise InvalidParameter(f"n_k must be >= 1, got {n_k}")
    floor = math.log(n_k)
    if not max_radius > floor:
        raise InvalidParameter(
            f"max_radius must exceed ln(n_k) = {floor:.6g}, got {max_radius}"
        )
    return max_radius - floor


def refine_beta(state: ModelState, config: StreamConfig, min_beta: float = MIN_BETA) -> float:
    """Advisory refinement from a clustered state: the observed maximum
    member-to-own-mean distance minus ln of the mean cluster size.

    Degenerate zero-spread states clamp to min_beta. Does not mutate state.
    """
    if not state.clusters:
        raise ContractViolation("refine_beta needs at least one cluster")
    r_obs = 0.0
    for obs_id, label in state.assignments.items():
        d = config.distance(state.features[obs_id], state.clusters[label].mean)
        if d > r_obs:
            r_obs = d
    n_bar = state.total_assigned / len(state.clusters)
    return max(r_obs - math.log(n_bar), min_beta)


def run_stream(
    observations: list[Observation], config: StreamConfig
) -> tuple[ModelState, dict[int, int]]:
    """Cluster a stream in one pass, each observation assigned exactly once.

    Input must be sorted by arrival_index: the temporal order is what makes
    the single sweep meaningful.
    """
    last = None
    for obs in observations:
        if last is not None and obs.arrival_index <= last:
            raise OrderingError(
                f"observations must be sorted by arrival_index; "
                f"{obs.arrival_index} follows {last}"
            )
        last = obs.arrival_index
    state = ModelState(rng_seed=config.rng_seed)
    for obs in observations:
        assign(state, obs, config)
    return state, dict(state.assignments)


def run_converged(
    observations: list[Observation], config: StreamConfig, max_sweeps: int
) -> tuple[ModelState, dict[int, int], int]:
    """Single pass plus full resampling sweeps until labels stop changing.

    Exists to compare converged clustering against the single pass; the
    comparison is the point, not the mode. Observations are processed in
    the given list order, which need not be temporal. Returns the state,
    the assignment map, and the number of sweeps used.
    """
    if max_sweeps < 1:
        raise InvalidParameter(f"max_sweeps must be >= 1, got {max_sweeps}")
    state = ModelState(rng_seed=config.rng_seed)
    for obs in observations:
        assign(state, obs, config)
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        changes = 0
        for obs in observations:
            old, new = resample(state, obs, config)
            if new != old:
                changes += 1
        if changes == 0:
            break
    return state, dict(state.assignments), sweeps
