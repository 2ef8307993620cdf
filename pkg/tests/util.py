"""Independent oracles shared by the test modules.

Everything here recomputes expected results from first principles (pure
python loops, exhaustive enumeration) and stays independent of the code
paths it checks.
"""

from __future__ import annotations

import math

import numpy as np

from gravclust import Observation


def make_obs(obs_id, features, frame=None, index=None):
    return Observation(
        obs_id=obs_id,
        features=np.asarray(features, dtype=float),
        arrival_index=obs_id if index is None else index,
        arrival_frame=obs_id if frame is None else frame,
        source_id=f"t{obs_id}",
    )


def brute_force_options(cluster_stats, features, beta):
    """Enumerate (label, log_score) by direct evaluation of the assignment
    posterior: e^(-beta) for a new cluster, e^(-x) * n_k for existing ones.
    Pure python, works from (label, mean, n) summaries."""
    options = [(None, -beta)]
    for label, mean, n in sorted(cluster_stats, key=lambda c: c[0]):
        x = math.dist(list(features), list(mean))
        options.append((label, -x + math.log(n)))
    return options


def brute_force_choice(cluster_stats, features, beta):
    """MAP winner under ties-prefer-existing-lowest-label."""
    options = brute_force_options(cluster_stats, features, beta)
    best_label, best_score = options[0]
    for label, log_score in options[1:]:
        if log_score > best_score or (log_score == best_score and best_label is None):
            best_label, best_score = label, log_score
    return best_label


def recompute_cluster_stats(members_by_label):
    """Exhaustive recomputation: exact mean and count per cluster from the
    raw member features."""
    stats = {}
    for label, members in members_by_label.items():
        if not members:
            continue
        matrix = np.array(members, dtype=float)
        stats[label] = (matrix.shape[0], matrix.mean(axis=0))
    return stats


def dbscan_oracle(points, eps, min_samples):
    """Reachability-graph components by brute force.

    Returns (core_flags, core_component_ids, border_core_neighbors,
    noise_flags); border points may validly join any adjacent core's
    component, so the check is partition equality on cores plus adjacency
    validity for borders.
    """
    matrix = np.asarray(points, dtype=float)
    n = matrix.shape[0]
    adjacency = [
        [j for j in range(n) if math.dist(list(matrix[i]), list(matrix[j])) <= eps]
        for i in range(n)
    ]
    core = [len(adjacency[i]) >= min_samples for i in range(n)]
    component = [-1] * n
    current = 0
    for seed in range(n):
        if not core[seed] or component[seed] != -1:
            continue
        stack = [seed]
        component[seed] = current
        while stack:
            p = stack.pop()
            for q in adjacency[p]:
                if core[q] and component[q] == -1:
                    component[q] = current
                    stack.append(q)
        current += 1
    border_neighbors = {}
    noise = [False] * n
    for i in range(n):
        if core[i]:
            continue
        cores_near = [component[j] for j in adjacency[i] if core[j]]
        if cores_near:
            border_neighbors[i] = set(cores_near)
        else:
            noise[i] = True
    return core, component, border_neighbors, noise


def check_dbscan_against_oracle(points, labels, eps, min_samples):
    """Assert `labels` is a valid reachability-components clustering."""
    core, component, border_neighbors, noise = dbscan_oracle(points, eps, min_samples)
    n = len(labels)
    for i in range(n):
        if noise[i]:
            assert labels[i] == -1, f"point {i} should be noise"
        else:
            assert labels[i] != -1, f"point {i} should not be noise"
    # Core partition must match exactly (up to relabeling).
    seen = {}
    for i in range(n):
        if not core[i]:
            continue
        key = component[i]
        if key in seen:
            assert labels[i] == seen[key], f"cores {i} split across labels"
        else:
            assert labels[i] not in seen.values(), f"core components merged at {i}"
            seen[key] = labels[i]
    # Borders must sit in a component that has a core within eps of them.
    label_of_component = seen
    for i, components in border_neighbors.items():
        valid = {label_of_component[c] for c in components}
        assert labels[i] in valid, f"border {i} attached to a non-adjacent cluster"


def spearman(x, y):
    """Spearman rank correlation with average ranks on ties."""

    def ranks(values):
        order = np.argsort(values, kind="stable")
        r = np.empty(len(values), dtype=float)
        i = 0
        sorted_vals = np.asarray(values)[order]
        while i < len(values):
            j = i
            while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
                j += 1
            r[order[i : j + 1]] = (i + j) / 2.0 + 1.0
            i = j + 1
        return r

    rx, ry = ranks(x), ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float((rx * rx).sum()) * float((ry * ry).sum()))
    return float((rx * ry).sum()) / denom
