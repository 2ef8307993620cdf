"""File formats: trajectory loaders, delimited reports, and checkpoints.

Two trajectory carriers are accepted and parse to identical values:
JSON Lines ({"id": ..., "points": [[frame, x, y], ...]} per line) and
long-form CSV (header track_id,frame,x,y). Assignments and ground truth
travel as two-column CSV, sweep/scaling reports as TSV, cluster stats and
metrics as JSON, segment dynamics as JSON Lines. Every writer goes through
a temp-file-plus-rename so partial outputs never appear.
"""

from __future__ import annotations

import csv
import io as _stdio
import json
import logging
import os
import tempfile

import numpy as np

from .engine import ModelState
from .errors import FormatError, InvalidParameter
from .evaluate import ConfusionCounts, GroundTruth, ScalingRow, SweepRow
from .model import Cluster, Observation, TrackPoint, Trajectory
from .synth import PathTemplate, Region, SceneSpec
from .windowed import SegmentCluster, SegmentStats, WindowConfig, WindowedState

log = logging.getLogger(__name__)

STATE_FORMAT_VERSION = 1


def atomic_write_text(path: str, text: str) -> None:
    """Write via a sibling temp file and rename, so outputs are all-or-nothing."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# trajectory loading


def _trajectory_from_points(traj_id: str, raw_points, where: str) -> Trajectory | None:
    try:
        points = tuple(
            TrackPoint(frame=int(p[0]), x=float(p[1]), y=float(p[2])) for p in raw_points
        )
        return Trajectory(id=str(traj_id), points=points)
    except (InvalidParameter, ValueError, TypeError, IndexError) as exc:
        log.warning("skipping trajectory %r (%s): %s", traj_id, where, exc)
        return None


def _load_jsonl(path: str) -> list[Trajectory]:
    out = []
    saw_record = False
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            saw_record = True
            try:
                record = json.loads(line)
                traj_id, raw_points = record["id"], record["points"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                log.warning("skipping malformed record at %s:%d: %s", path, lineno, exc)
                continue
            traj = _trajectory_from_points(traj_id, raw_points, f"{path}:{lineno}")
            if traj is not None:
                out.append(traj)
    if saw_record and not out:
        raise FormatError(f"no parseable trajectories in {path}")
    return out


def _load_csv(path: str) -> list[Trajectory]:
    grouped: dict[str, list[tuple[int, float, float]]] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path} is empty")
        expected = ["track_id", "frame", "x", "y"]
        if [h.strip() for h in header] != expected:
            raise FormatError(f"{path}: expected header {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                track_id = row[0]
                point = (int(row[1]), float(row[2]), float(row[3]))
            except (ValueError, IndexError) as exc:
                log.warning("skipping malformed row at %s:%d: %s", path, lineno, exc)
                continue
            if track_id not in grouped:
                grouped[track_id] = []
                order.append(track_id)
            grouped[track_id].append(point)
    out = []
    for track_id in order:
        points = sorted(grouped[track_id], key=lambda p: p[0])
        traj = _trajectory_from_points(track_id, points, path)
        if traj is not None:
            out.append(traj)
    if grouped and not out:
        raise FormatError(f"no parseable trajectories in {path}")
    return out


def _detect_format(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    if ext in (".jsonl", ".json"):
        return "jsonl"
    if ext == ".csv":
        return "csv"
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                return "jsonl"
            if line.replace(" ", "").startswith("track_id,"):
                return "csv"
            break
    raise FormatError(f"cannot detect trajectory format of {path}")


def load_trajectories(path: str, fmt: str = "auto") -> list[Trajectory]:
    """Load and validate trajectories, sorted by completion frame.

    Malformed records are warned about (with line numbers) and skipped; a
    file yielding nothing parseable raises FormatError.
    """
    if not os.path.exists(path):
        raise FormatError(f"no such file: {path}")
    if fmt == "auto":
        fmt = _detect_format(path)
    if fmt == "jsonl":
        trajectories = _load_jsonl(path)
    elif fmt == "csv":
        trajectories = _load_csv(path)
    else:
        raise InvalidParameter(f"format must be auto, jsonl, or csv, got {fmt!r}")
    if not trajectories:
        raise FormatError(f"no trajectories in {path}")
    return sorted(trajectories, key=lambda t: t.completion_frame)


def write_trajectories_jsonl(trajectories: list[Trajectory], path: str) -> None:
    lines = [
        _dumps({"id": t.id, "points": [[p.frame, p.x, p.y] for p in t.points]})
        for t in trajectories
    ]
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# two-column CSV (assignments, ground truth)


def _write_pairs_csv(pairs: dict[int, int], path: str, header: tuple[str, str]) -> None:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for key in sorted(pairs):
        writer.writerow([key, pairs[key]])
    atomic_write_text(path, buf.getvalue())


def _read_pairs_csv(path: str) -> dict[int, int]:
    if not os.path.exists(path):
        raise FormatError(f"no such file: {path}")
    pairs: dict[int, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row:
                continue
            try:
                pairs[int(row[0])] = int(row[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise FormatError(f"{path}:{lineno}: expected two integers")
    if not pairs:
        raise FormatError(f"no records in {path}")
    return pairs


def write_assignments_csv(assignments: dict[int, int], path: str) -> None:
    _write_pairs_csv(assignments, path, ("obs_id", "label"))


def read_assignments_csv(path: str) -> dict[int, int]:
    return _read_pairs_csv(path)


def write_ground_truth_csv(gt: GroundTruth, path: str) -> None:
    _write_pairs_csv(gt.labels, path, ("obs_id", "group"))


def read_ground_truth_csv(path: str) -> GroundTruth:
    return GroundTruth(_read_pairs_csv(path))


# ---------------------------------------------------------------------------
# cluster stats, metrics, dynamics


def _cluster_doc(cluster: Cluster) -> dict:
    cov = cluster.covariance
    return {
        "label": cluster.label,
        "n": cluster.n,
        "created_segment": cluster.created_segment,
        "mean": cluster.mean.tolist(),
        "covariance": None if cov is None else cov.tolist(),
    }


def write_clusters_json(state: ModelState, path: str) -> None:
    doc = {
        "version": STATE_FORMAT_VERSION,
        "n_clusters": state.n_clusters,
        "next_label": state.next_label,
        "total_assigned": state.total_assigned,
        "work": state.work_counter,
        "clusters": [_cluster_doc(state.clusters[lab]) for lab in state.labels_sorted()],
    }
    atomic_write_text(path, _dumps(doc) + "\n")


def write_metrics_json(counts: ConfusionCounts, path: str) -> None:
    doc = {
        "version": STATE_FORMAT_VERSION,
        "n_total": counts.n_total,
        "tp": counts.tp,
        "fp": counts.fp,
        "fn": counts.fn,
        "tn": counts.tn,
        "accuracy": counts.accuracy,
        "precision": counts.precision,
        "recall": counts.recall,
    }
    atomic_write_text(path, _dumps(doc) + "\n")


def _segment_doc(stats: SegmentStats) -> dict:
    return {
        "segment": stats.segment_index,
        "clusters": [
            {
                "label": label,
                "n": entry.n,
                "mean": entry.mean.tolist(),
                "covariance": None if entry.covariance is None else entry.covariance.tolist(),
            }
            for label, entry in sorted(stats.per_cluster.items())
        ],
    }


def _segment_from_doc(doc: dict) -> SegmentStats:
    per_cluster = {}
    for entry in doc["clusters"]:
        per_cluster[int(entry["label"])] = SegmentCluster(
            n=int(entry["n"]),
            mean=np.asarray(entry["mean"], dtype=float),
            covariance=(
                None
                if entry["covariance"] is None
                else np.asarray(entry["covariance"], dtype=float)
            ),
        )
    return SegmentStats(segment_index=int(doc["segment"]), per_cluster=per_cluster)


def write_dynamics_jsonl(history: list[SegmentStats], path: str) -> None:
    lines = [_dumps(_segment_doc(stats)) for stats in history]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_dynamics_jsonl(path: str) -> list[SegmentStats]:
    out = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                out.append(_segment_from_doc(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# TSV reports


def write_sweep_tsv(rows: list[SweepRow], path: str) -> None:
    lines = ["beta\tcluster_count\telapsed_s\twork\taccuracy"]
    for row in rows:
        accuracy = "" if row.accuracy is None else repr(row.accuracy)
        lines.append(
            f"{row.beta!r}\t{row.cluster_count}\t{row.elapsed_s!r}\t{row.work}\t{accuracy}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_scaling_tsv(rows: list[ScalingRow], path: str) -> None:
    lines = ["n\twork\telapsed_s"]
    for row in rows:
        lines.append(f"{row.n}\t{row.work}\t{row.elapsed_s!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# scene specs


def _region_from_doc(doc: dict) -> Region:
    return Region(center=(float(doc["center"][0]), float(doc["center"][1])), radius=float(doc["radius"]))


def read_scene_spec(path: str) -> SceneSpec:
    """Scene spec JSON: noise_seed, frames_per_segment, n_segments, and a
    template list ({start, end, duration{mean,std}, rate, active_segments})."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
        templates = []
        for tdoc in doc["templates"]:
            active = tdoc.get("active_segments")
            templates.append(
                PathTemplate(
                    start=_region_from_doc(tdoc["start"]),
                    end=_region_from_doc(tdoc["end"]),
                    duration_mean=float(tdoc["duration"]["mean"]),
                    duration_std=float(tdoc["duration"]["std"]),
                    rate=float(tdoc["rate"]),
                    active_segments=None if active is None else frozenset(int(s) for s in active),
                )
            )
        return SceneSpec(
            templates=tuple(templates),
            noise_seed=int(doc.get("noise_seed", 0)),
            frames_per_segment=int(doc.get("frames_per_segment", 1000)),
            n_segments=int(doc.get("n_segments", 1)),
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"bad scene spec {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# checkpoints


def _observation_doc(obs: Observation) -> dict:
    return {
        "obs_id": obs.obs_id,
        "features": obs.features.tolist(),
        "arrival_index": obs.arrival_index,
        "arrival_frame": obs.arrival_frame,
        "source_id": obs.source_id,
    }


def _observation_from_doc(doc: dict) -> Observation:
    return Observation(
        obs_id=int(doc["obs_id"]),
        features=np.asarray(doc["features"], dtype=float),
        arrival_index=int(doc["arrival_index"]),
        arrival_frame=int(doc["arrival_frame"]),
        source_id=str(doc["source_id"]),
    )


def model_state_to_doc(state: ModelState) -> dict:
    return {
        "version": STATE_FORMAT_VERSION,
        "kind": "model-state",
        "next_label": state.next_label,
        "total_assigned": state.total_assigned,
        "work_counter": state.work_counter,
        "rng": state.rng.bit_generator.state,
        "clusters": [
            {
                "label": c.label,
                "n": c.n,
                "created_segment": c.created_segment,
                "mean": c.mean.tolist(),
                "m2": c.m2.tolist(),
            }
            for c in (state.clusters[lab] for lab in state.labels_sorted())
        ],
        "assignments": [[obs_id, label] for obs_id, label in sorted(state.assignments.items())],
        "features": [
            [obs_id, state.features[obs_id].tolist()] for obs_id in sorted(state.features)
        ],
    }


def model_state_from_doc(doc: dict) -> ModelState:
    if doc.get("kind") != "model-state" or doc.get("version") != STATE_FORMAT_VERSION:
        raise FormatError("not a supported model-state document")
    state = ModelState()
    state.rng.bit_generator.state = doc["rng"]
    state.next_label = int(doc["next_label"])
    state.total_assigned = int(doc["total_assigned"])
    state.work_counter = int(doc["work_counter"])
    for cdoc in doc["clusters"]:
        cluster = Cluster(
            label=int(cdoc["label"]),
            n=int(cdoc["n"]),
            mean=np.asarray(cdoc["mean"], dtype=float),
            m2=np.asarray(cdoc["m2"], dtype=float),
            created_segment=int(cdoc["created_segment"]),
        )
        state.clusters[cluster.label] = cluster
    state.assignments = {int(o): int(lab) for o, lab in doc["assignments"]}
    state.features = {int(o): np.asarray(f, dtype=float) for o, f in doc["features"]}
    return state


def save_model_state(state: ModelState, path: str) -> None:
    atomic_write_text(path, _dumps(model_state_to_doc(state)) + "\n")


def load_model_state(path: str) -> ModelState:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return model_state_from_doc(json.load(handle))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"bad model state {path}: {exc}") from exc


def windowed_state_to_doc(state: WindowedState) -> dict:
    return {
        "version": STATE_FORMAT_VERSION,
        "kind": "windowed-state",
        "model": model_state_to_doc(state.model),
        "window": [
            {"obs": _observation_doc(obs), "label": label} for obs, label in state.window
        ],
        "current_segment": state.current_segment,
        "prev_boundary_frame": state.prev_boundary_frame,
        "last_ingest_frame": state.last_ingest_frame,
        "label_log": [[obs_id, label] for obs_id, label in sorted(state.label_log.items())],
        "history": [_segment_doc(stats) for stats in state.history],
    }


def windowed_state_from_doc(doc: dict, config: WindowConfig) -> WindowedState:
    if doc.get("kind") != "windowed-state" or doc.get("version") != STATE_FORMAT_VERSION:
        raise FormatError("not a supported windowed-state document")
    state = WindowedState(config)
    state.model = model_state_from_doc(doc["model"])
    state.window = [
        (_observation_from_doc(w["obs"]), int(w["label"])) for w in doc["window"]
    ]
    state.current_segment = int(doc["current_segment"])
    state.prev_boundary_frame = int(doc["prev_boundary_frame"])
    state.last_ingest_frame = (
        None if doc["last_ingest_frame"] is None else int(doc["last_ingest_frame"])
    )
    state.label_log = {int(o): int(lab) for o, lab in doc["label_log"]}
    state.history = [_segment_from_doc(s) for s in doc["history"]]
    return state


def save_windowed_state(state: WindowedState, path: str) -> None:
    atomic_write_text(path, _dumps(windowed_state_to_doc(state)) + "\n")


def load_windowed_state(path: str, config: WindowConfig) -> WindowedState:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return windowed_state_from_doc(json.load(handle), config)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"bad windowed state {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# beta grids


def parse_beta_grid(text: str) -> list[float]:
    """Parse "a:b:step" (inclusive grid), "x,y,z", or a single value."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise InvalidParameter(f"grid must be a:b:step, got {text!r}")
            a, b, step = (float(p) for p in parts)
            if step <= 0 or b < a:
                raise InvalidParameter(f"grid must have step > 0 and b >= a, got {text!r}")
            out = []
            i = 0
            while True:
                value = a + i * step
                if value > b + 1e-9 * max(1.0, abs(b)):
                    break
                out.append(value)
                i += 1
            return out
        if "," in text:
            return [float(p) for p in text.split(",") if p.strip()]
        return [float(text)]
    except ValueError as exc:
        raise InvalidParameter(f"bad beta grid {text!r}: {exc}") from exc
