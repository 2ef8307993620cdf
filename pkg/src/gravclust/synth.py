"""Synthetic traffic scenes with known ground truth.

Each path template draws trajectories between a start and an end region at
a Poisson rate per time segment; the stream interleaves templates in
completion-frame order. Serves as the oracle for recovery, window, and
scaling tests, and as a sampler for round-tripping a learned model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import ModelState
from .errors import ContractViolation, InvalidParameter
from .evaluate import GroundTruth
from .model import Observation, TrackPoint, Trajectory


@dataclass(frozen=True, slots=True)
class Region:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameter(f"region radius must be positive, got {self.radius}")


@dataclass(frozen=True, slots=True)
class PathTemplate:
    """One usual path: where trajectories start and end, how long they take,
    how many appear per segment, and in which segments the path is live."""

    start: Region
    end: Region
    duration_mean: float
    duration_std: float
    rate: float
    active_segments: frozenset[int] | None = None  # None = all segments

    def __post_init__(self):
        if not self.duration_mean > 0:
            raise InvalidParameter("duration_mean must be positive")
        if self.rate < 0:
            raise InvalidParameter("rate must be >= 0")

    def active_in(self, segment: int) -> bool:
        return self.active_segments is None or segment in self.active_segments


@dataclass(frozen=True, slots=True)
class SceneSpec:
    templates: tuple[PathTemplate, ...]
    noise_seed: int = 0
    frames_per_segment: int = 1000
    n_segments: int = 1

    def __post_init__(self):
        if len(self.templates) < 1:
            raise InvalidParameter("scene needs at least one template")
        if self.frames_per_segment < 1 or self.n_segments < 1:
            raise InvalidParameter("frames_per_segment and n_segments must be >= 1")


def _uniform_disk(rng: np.random.Generator, region: Region) -> tuple[float, float]:
    r = region.radius * math.sqrt(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return region.center[0] + r * math.cos(theta), region.center[1] + r * math.sin(theta)


def _linear_trajectory(
    traj_id: str,
    start: tuple[float, float],
    end: tuple[float, float],
    duration: int,
    completion: int,
) -> Trajectory:
    start_frame = completion - duration
    num = min(duration + 1, 6)
    offsets = sorted(
        {int(math.floor(o)) for o in np.linspace(0.0, duration, num)} | {0, duration}
    )
    points = tuple(
        TrackPoint(
            frame=start_frame + o,
            x=start[0] + (end[0] - start[0]) * o / duration,
            y=start[1] + (end[1] - start[1]) * o / duration,
        )
        for o in offsets
    )
    return Trajectory(id=traj_id, points=points)


def _draw_trajectory(
    rng: np.random.Generator,
    template: PathTemplate,
    segment: int,
    frames_per_segment: int,
    traj_id: str,
) -> tuple[int, Trajectory]:
    start = _uniform_disk(rng, template.start)
    end = _uniform_disk(rng, template.end)
    duration = max(2, int(round(rng.normal(template.duration_mean, template.duration_std))))
    completion = int(
        rng.integers(segment * frames_per_segment, (segment + 1) * frames_per_segment)
    )
    # A track cannot begin before frame 0.
    if completion < duration:
        completion = duration
    return completion, _linear_trajectory(traj_id, start, end, duration, completion)


def generate_scene(spec: SceneSpec) -> tuple[list[Trajectory], GroundTruth]:
    """Draw a scene: Poisson(rate) trajectories per active template and
    segment, output sorted by completion frame. Ground-truth group of each
    observation is its template index. Deterministic per noise_seed."""
    rng = np.random.default_rng(spec.noise_seed)
    records: list[tuple[int, int, int, Trajectory]] = []
    seq = 0
    for segment in range(spec.n_segments):
        for t_idx, template in enumerate(spec.templates):
            if not template.active_in(segment):
                continue
            count = int(rng.poisson(template.rate))
            for _ in range(count):
                completion, traj = _draw_trajectory(
                    rng, template, segment, spec.frames_per_segment, f"p{t_idx}s{segment}n{seq}"
                )
                records.append((completion, seq, t_idx, traj))
                seq += 1
    records.sort(key=lambda r: (r[0], r[1]))
    trajectories = [r[3] for r in records]
    gt = GroundTruth({i: r[2] for i, r in enumerate(records)})
    return trajectories, gt


def ring_scene_spec(
    n_paths: int,
    expected_total: int,
    seed: int = 0,
    radius: float = 2.5,
    ring_radius: float = 400.0,
    duration_mean: float = 30.0,
    duration_std: float = 3.0,
    frames_per_segment: int = 1000,
    n_segments: int = 1,
) -> SceneSpec:
    """Well-separated canonical scene: start regions evenly spaced on a ring,
    each path ending at the antipode. Inter-path separation is hundreds of
    times the region radius, so recovery is unambiguous for a sane beta."""
    templates = []
    for j in range(n_paths):
        angle = 2.0 * math.pi * j / n_paths
        cx = ring_radius * math.cos(angle)
        cy = ring_radius * math.sin(angle)
        templates.append(
            PathTemplate(
                start=Region((cx, cy), radius),
                end=Region((-cx, -cy), radius),
                duration_mean=duration_mean,
                duration_std=duration_std,
                rate=expected_total / (n_paths * n_segments),
            )
        )
    return SceneSpec(
        templates=tuple(templates),
        noise_seed=seed,
        frames_per_segment=frames_per_segment,
        n_segments=n_segments,
    )


def generate_exact_scene(
    n_paths: int,
    total: int,
    seed: int = 0,
    radius: float = 2.5,
    ring_radius: float = 400.0,
) -> tuple[list[Trajectory], GroundTruth]:
    """Like generate_scene on a ring scene, but with exactly `total`
    trajectories split evenly across paths. Benchmarks need exact sizes;
    Poisson counts would blur work-versus-n ratios."""
    if total < 1 or n_paths < 1:
        raise InvalidParameter("total and n_paths must be >= 1")
    spec = ring_scene_spec(n_paths, total, seed=seed, radius=radius, ring_radius=ring_radius)
    rng = np.random.default_rng(seed)
    records: list[tuple[int, int, int, Trajectory]] = []
    seq = 0
    for t_idx, template in enumerate(spec.templates):
        count = total // n_paths + (1 if t_idx < total % n_paths else 0)
        for _ in range(count):
            completion, traj = _draw_trajectory(
                rng, template, 0, spec.frames_per_segment, f"p{t_idx}s0n{seq}"
            )
            records.append((completion, seq, t_idx, traj))
            seq += 1
    records.sort(key=lambda r: (r[0], r[1]))
    trajectories = [r[3] for r in records]
    gt = GroundTruth({i: r[2] for i, r in enumerate(records)})
    return trajectories, gt


def sample_from_model(state: ModelState, n: int, seed: int) -> list[Observation]:
    """Draw n observations from a learned state: labels proportional to
    cluster sizes, features from a per-dimension Gaussian at the cluster
    mean (sample variance per dimension for n_k >= 2, unit otherwise)."""
    if not state.clusters:
        raise ContractViolation("cannot sample from an empty state")
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    labels = sorted(state.clusters)
    sizes = np.array([state.clusters[lab].n for lab in labels], dtype=float)
    picks = rng.choice(len(labels), size=n, p=sizes / sizes.sum())
    out = []
    for i, pick in enumerate(picks):
        cluster = state.clusters[labels[int(pick)]]
        d = cluster.mean.shape[0]
        if cluster.n >= 2:
            std = np.sqrt(np.clip(np.diag(cluster.m2) / cluster.n, 1e-12, None))
        else:
            std = np.ones(d)
        features = cluster.mean + rng.standard_normal(d) * std
        out.append(
            Observation(
                obs_id=i,
                features=features,
                arrival_index=i,
                arrival_frame=i,
                source_id=f"sample-{cluster.label}",
            )
        )
    return out
