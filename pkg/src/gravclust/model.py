"""Domain types and feature extraction.

Trajectories are ordered track points of one moving object. The unit that
actually gets clustered is an Observation: a fixed-dimension feature vector
built from a trajectory's endpoints and duration, stamped with its position
in the arrival stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InvalidParameter

SELECTORS = ("start", "end", "start_end", "full")

_SELECTOR_DIM = {"start": 2, "end": 2, "start_end": 4, "full": 5}


@dataclass(frozen=True, slots=True)
class TrackPoint:
    """One tracked position: frame index plus pixel coordinates."""

    frame: int
    x: float
    y: float

    def __post_init__(self):
        if self.frame < 0:
            raise InvalidParameter(f"frame must be >= 0, got {self.frame}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidParameter(f"coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True, slots=True)
class Trajectory:
    """Track of one object: >= 2 points with strictly increasing frames."""

    id: str
    points: tuple[TrackPoint, ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise InvalidParameter(
                f"trajectory {self.id!r} needs >= 2 points, got {len(self.points)}"
            )
        frames = [p.frame for p in self.points]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise InvalidParameter(f"trajectory {self.id!r} frames must strictly increase")

    @property
    def completion_frame(self) -> int:
        return self.points[-1].frame

    @property
    def duration(self) -> int:
        """Track duration in frames (last frame minus first frame)."""
        return self.points[-1].frame - self.points[0].frame


@dataclass(frozen=True, slots=True)
class FeatureConfig:
    """Which feature vector to build from a trajectory.

    selector: "start" (x_s, y_s), "end" (x_e, y_e),
              "start_end" (x_s, y_s, x_e, y_e), or
              "full" (x_s, y_s, x_e, y_e, t_dur).
    scale: optional per-dimension positive multipliers, applied after
           assembly. Raw pixel/frame units are the default; scaling is the
           knob for balancing axes of different units.
    """

    selector: str = "full"
    scale: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.selector not in SELECTORS:
            raise InvalidParameter(
                f"selector must be one of {SELECTORS}, got {self.selector!r}"
            )
        if self.scale is not None:
            if len(self.scale) != self.dimension:
                raise InvalidParameter(
                    f"scale length {len(self.scale)} does not match "
                    f"dimension {self.dimension} of selector {self.selector!r}"
                )
            if any(not (s > 0 and math.isfinite(s)) for s in self.scale):
                raise InvalidParameter("scale entries must be strictly positive")

    @property
    def dimension(self) -> int:
        return _SELECTOR_DIM[self.selector]


@dataclass(frozen=True, slots=True, eq=False)
class Observation:
    """One clustered unit: feature vector plus stream position."""

    obs_id: int
    features: np.ndarray
    arrival_index: int
    arrival_frame: int
    source_id: str


@dataclass(slots=True)
class Cluster:
    """Running statistics of one learned path pattern.

    mean is the exact arithmetic mean of the currently assigned members;
    m2 accumulates outer-product deviations so that the population
    covariance is m2 / n for n >= 2. Both support exact removal, which the
    sliding-window mode relies on.
    """

    label: int
    n: int
    mean: np.ndarray
    m2: np.ndarray
    created_segment: int = 0

    @classmethod
    def singleton(cls, label: int, features: np.ndarray, created_segment: int = 0) -> "Cluster":
        d = features.shape[0]
        return cls(label, 1, features.astype(float).copy(), np.zeros((d, d)), created_segment)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.n
        self.m2 = self.m2 + np.outer(delta, x - self.mean)

    def remove(self, x: np.ndarray) -> None:
        """Exact downdate; caller must drop the cluster when n reaches 0."""
        if self.n <= 0:
            raise ContractViolation(f"cluster {self.label} is already empty")
        if self.n == 1:
            self.n = 0
            return
        old_mean = self.mean
        self.n -= 1
        self.mean = old_mean + (old_mean - x) / self.n
        self.m2 = self.m2 - np.outer(x - self.mean, x - old_mean)

    @property
    def covariance(self) -> np.ndarray | None:
        """Population covariance m2/n, or None below two members."""
        if self.n < 2:
            return None
        return self.m2 / self.n

    def copy(self) -> "Cluster":
        return Cluster(self.label, self.n, self.mean.copy(), self.m2.copy(), self.created_segment)


def euclidean(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance. The engines accept any callable with this shape;
    only Euclidean ships."""
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")
    delta = a - b
    return float(np.sqrt(np.dot(delta, delta)))


def extract_features(
    trajectory: Trajectory,
    config: FeatureConfig,
    obs_id: int = 0,
    arrival_index: int = 0,
) -> Observation:
    """Build the observation vector for one trajectory.

    Feature order is fixed (x_start, y_start, x_end, y_end, t_dur) so that
    serialized state stays portable; the selector picks a subset. Duration
    is in frames.
    """
    first = trajectory.points[0]
    last = trajectory.points[-1]
    if config.selector == "start":
        values = [first.x, first.y]
    elif config.selector == "end":
        values = [last.x, last.y]
    elif config.selector == "start_end":
        values = [first.x, first.y, last.x, last.y]
    else:
        values = [first.x, first.y, last.x, last.y, float(trajectory.duration)]
    features = np.asarray(values, dtype=float)
    if config.scale is not None:
        features = features * np.asarray(config.scale, dtype=float)
    return Observation(
        obs_id=obs_id,
        features=features,
        arrival_index=arrival_index,
        arrival_frame=trajectory.completion_frame,
        source_id=trajectory.id,
    )


def observations_from_trajectories(
    trajectories: list[Trajectory], config: FeatureConfig
) -> list[Observation]:
    """Extract features for a whole stream, assigning consecutive ids.

    The given order is taken as the arrival order; loaders sort by
    completion frame before calling this.
    """
    return [
        extract_features(traj, config, obs_id=i, arrival_index=i)
        for i, traj in enumerate(trajectories)
    ]
