"""Reference density/mode-seeking baselines for head-to-head comparisons.

Deliberately small, deterministic implementations operating on the same
observation vectors as the streaming engine. Both are order-insensitive,
which is exactly the property the engine departs from.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InvalidParameter

NOISE = -1


@dataclass(frozen=True, slots=True)
class DbscanConfig:
    eps: float
    min_samples: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidParameter(f"eps must be positive, got {self.eps}")
        if self.min_samples < 1:
            raise InvalidParameter(f"min_samples must be >= 1, got {self.min_samples}")


@dataclass(frozen=True, slots=True)
class MeanShiftConfig:
    """Exactly one of bandwidth or quantile must be set; a quantile is
    resolved to a bandwidth from the pairwise-distance distribution."""

    bandwidth: float | None = None
    quantile: float | None = None

    def __post_init__(self):
        if (self.bandwidth is None) == (self.quantile is None):
            raise InvalidParameter("set exactly one of bandwidth or quantile")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise InvalidParameter(f"bandwidth must be positive, got {self.bandwidth}")
        if self.quantile is not None and not 0.0 < self.quantile < 1.0:
            raise InvalidParameter(f"quantile must be in (0, 1), got {self.quantile}")


def _as_matrix(points: list[np.ndarray] | np.ndarray) -> np.ndarray:
    matrix = np.asarray(points, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise ContractViolation("points must be a nonempty list of equal-length vectors")
    return matrix


def dbscan(points: list[np.ndarray] | np.ndarray, config: DbscanConfig) -> np.ndarray:
    """Density clustering; returns one integer label per point, -1 = noise.

    A point is core iff it has >= min_samples neighbors within eps
    (distance <= eps, itself included). Clusters are connected components
    of core points; non-core points within eps of a core join that core's
    cluster. With min_samples=1 every point is core and no noise occurs.
    """
    matrix = _as_matrix(points)
    n = matrix.shape[0]
    diffs = matrix[:, None, :] - matrix[None, :, :]
    dist = np.sqrt((diffs * diffs).sum(axis=2))
    adjacency = dist <= config.eps
    core = adjacency.sum(axis=1) >= config.min_samples
    labels = np.full(n, NOISE, dtype=int)
    current = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = current
        frontier = deque([seed])
        while frontier:
            p = frontier.popleft()
            for q in np.flatnonzero(adjacency[p]):
                if labels[q] != NOISE:
                    continue
                labels[q] = current
                if core[q]:
                    frontier.append(q)
        current += 1
    return labels


def bandwidth_from_quantile(points: list[np.ndarray] | np.ndarray, quantile: float) -> float:
    """Nearest-rank quantile of all pairwise Euclidean distances."""
    matrix = _as_matrix(points)
    n = matrix.shape[0]
    if n < 2:
        raise ContractViolation("bandwidth estimation needs at least 2 points")
    if not 0.0 < quantile < 1.0:
        raise InvalidParameter(f"quantile must be in (0, 1), got {quantile}")
    iu = np.triu_indices(n, k=1)
    diffs = matrix[iu[0]] - matrix[iu[1]]
    pairwise = np.sort(np.sqrt((diffs * diffs).sum(axis=1)))
    rank = math.ceil(quantile * pairwise.shape[0])
    return float(pairwise[max(rank, 1) - 1])


def mean_shift(
    points: list[np.ndarray] | np.ndarray, config: MeanShiftConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Flat-kernel mean shift: every point iterates to the mean of its
    bandwidth-ball neighborhood; modes closer than bandwidth/2 merge;
    points are labeled by their nearest mode. Returns (labels, modes)."""
    matrix = _as_matrix(points)
    bandwidth = (
        config.bandwidth
        if config.bandwidth is not None
        else bandwidth_from_quantile(matrix, config.quantile)
    )
    tolerance = 1e-4 * bandwidth
    converged = np.empty_like(matrix)
    for i in range(matrix.shape[0]):
        center = matrix[i]
        for _ in range(300):
            dist = np.sqrt(((matrix - center) ** 2).sum(axis=1))
            shifted = matrix[dist <= bandwidth].mean(axis=0)
            if float(np.sqrt(((shifted - center) ** 2).sum())) < tolerance:
                center = shifted
                break
            center = shifted
        converged[i] = center
    modes: list[np.ndarray] = []
    for i in range(converged.shape[0]):
        for mode in modes:
            if float(np.sqrt(((converged[i] - mode) ** 2).sum())) < bandwidth / 2:
                break
        else:
            modes.append(converged[i].copy())
    mode_matrix = np.vstack(modes)
    dist_to_modes = np.sqrt(
        ((matrix[:, None, :] - mode_matrix[None, :, :]) ** 2).sum(axis=2)
    )
    labels = dist_to_modes.argmin(axis=1)
    return labels, mode_matrix


def minmax_normalize(points: list[np.ndarray] | np.ndarray) -> np.ndarray:
    """Scale each dimension to [0, 1]; constant dimensions map to 0."""
    matrix = _as_matrix(points)
    low = matrix.min(axis=0)
    span = matrix.max(axis=0) - low
    span[span == 0] = 1.0
    return (matrix - low) / span
