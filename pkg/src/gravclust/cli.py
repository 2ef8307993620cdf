"""Command-line surface.

Subcommands: cluster (single-sweep run), dem (windowed dynamics), sweep-beta,
eval, baseline dbscan|meanshift, synth, bench. Exit codes: 0 success,
1 usage, 2 input format, 3 contract/invariant violation. Outputs are
written atomically; report subcommands can additionally render a figure
with --plot.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io, plotting
from .baselines import DbscanConfig, MeanShiftConfig, dbscan, mean_shift, minmax_normalize
from .engine import StreamConfig, run_converged, run_stream
from .errors import ContractViolation, FormatError, InvalidParameter, NotFoundError
from .evaluate import beta_sweep, confusion, scaling_report
from .model import FeatureConfig, observations_from_trajectories
from .synth import generate_scene
from .windowed import WindowConfig, run_windowed

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_CONTRACT = 3

_FEATURES = {"start": "start", "end": "end", "start-end": "start_end", "full": "full"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_scale(text: str | None) -> tuple[float, ...] | None:
    if text is None:
        return None
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --scale {text!r}: {exc}") from exc


def _feature_config(args) -> FeatureConfig:
    return FeatureConfig(selector=_FEATURES[args.features], scale=_parse_scale(args.scale))


def _stream_config(args) -> StreamConfig:
    return StreamConfig(beta=args.beta, mode=args.mode, rng_seed=args.seed)


def _load_observations(args):
    trajectories = io.load_trajectories(args.input, args.format)
    return observations_from_trajectories(trajectories, _feature_config(args))


def _add_input_flags(parser, features=True):
    parser.add_argument("--input", required=True, help="trajectory file (JSONL or CSV)")
    parser.add_argument("--format", default="auto", choices=["auto", "jsonl", "csv"])
    if features:
        parser.add_argument("--features", default="full", choices=sorted(_FEATURES))
        parser.add_argument("--scale", default=None, help="per-dimension multipliers, e.g. 1,1,1,1,0.1")


def _add_engine_flags(parser):
    parser.add_argument("--beta", required=True, type=float, help="concentration radius")
    parser.add_argument("--mode", default="map", choices=["map", "gibbs"])
    parser.add_argument("--seed", default=0, type=int, help="rng seed (gibbs mode)")


def cmd_cluster(args) -> int:
    observations = _load_observations(args)
    config = _stream_config(args)
    if args.converge is not None:
        if args.converge < 1:
            raise UsageError("--converge must be >= 1")
        state, assignments, sweeps = run_converged(observations, config, args.converge)
        print(f"converged in {sweeps} sweep(s)")
    else:
        state, assignments = run_stream(observations, config)
    io.write_assignments_csv(assignments, args.out_assignments)
    io.write_clusters_json(state, args.out_clusters)
    if args.save_state:
        io.save_model_state(state, args.save_state)
    if args.plot:
        plotting.save_cluster_figure(observations, assignments, args.plot)
    print(f"observations={len(observations)} clusters={state.n_clusters} work={state.work_counter}")
    return EXIT_OK


def cmd_dem(args) -> int:
    config = WindowConfig(delta_t=args.delta_t, stream=_stream_config(args))
    state = io.load_windowed_state(args.load_state, config) if args.load_state else None
    trajectories = io.load_trajectories(args.input, args.format)
    base = 0
    if state is not None and state.label_log:
        base = max(state.label_log) + 1
    feature_config = _feature_config(args)
    observations = observations_from_trajectories(trajectories, feature_config)
    if base:
        observations = [
            type(o)(o.obs_id + base, o.features, o.arrival_index + base, o.arrival_frame, o.source_id)
            for o in observations
        ]
    state, label_map = run_windowed(observations, config, state)
    io.write_dynamics_jsonl(state.history, args.out_dynamics)
    io.write_assignments_csv(label_map, args.out_assignments)
    if args.save_state:
        io.save_windowed_state(state, args.save_state)
    if args.plot:
        plotting.save_dynamics_figure(state.history, args.plot)
    print(f"segments={len(state.history)} live_clusters={state.model.n_clusters}")
    return EXIT_OK


def cmd_sweep_beta(args) -> int:
    observations = _load_observations(args)
    betas = io.parse_beta_grid(args.betas)
    gt = io.read_ground_truth_csv(args.gt) if args.gt else None
    if gt is not None and set(gt.labels) != {o.obs_id for o in observations}:
        raise FormatError("--gt does not cover the input observations")
    rows = beta_sweep(observations, betas, _stream_config(args), gt)
    io.write_sweep_tsv(rows, args.out)
    if args.plot:
        plotting.save_beta_sweep_figure(rows, args.plot)
    print(f"betas={len(rows)} clusters={rows[0].cluster_count}..{rows[-1].cluster_count}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = io.read_assignments_csv(args.pred)
    gt = io.read_ground_truth_csv(args.gt)
    if set(pred) != set(gt.labels):
        raise FormatError("--pred and --gt must cover the same obs_ids")
    counts = confusion(pred, gt)
    io.write_metrics_json(counts, args.out)
    print(
        f"accuracy={counts.accuracy:.4f} precision={counts.precision:.4f} "
        f"recall={counts.recall:.4f}"
    )
    return EXIT_OK


def cmd_baseline(args) -> int:
    observations = _load_observations(args)
    matrix = np.array([o.features for o in observations])
    if args.normalize:
        matrix = minmax_normalize(matrix)
    if args.method == "dbscan":
        if args.eps is None:
            raise UsageError("dbscan requires --eps")
        if args.quantile is not None or args.bandwidth is not None:
            raise UsageError("--quantile/--bandwidth apply to meanshift only")
        labels = dbscan(matrix, DbscanConfig(eps=args.eps, min_samples=args.min_samples))
    else:
        if args.eps is not None:
            raise UsageError("--eps applies to dbscan only")
        if (args.quantile is None) == (args.bandwidth is None):
            raise UsageError("meanshift requires exactly one of --quantile or --bandwidth")
        labels, _ = mean_shift(
            matrix, MeanShiftConfig(bandwidth=args.bandwidth, quantile=args.quantile)
        )
    assignments = {o.obs_id: int(labels[i]) for i, o in enumerate(observations)}
    io.write_assignments_csv(assignments, args.out)
    print(f"observations={len(observations)} clusters={len(set(labels) - {-1})}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = io.read_scene_spec(args.spec)
    trajectories, gt = generate_scene(spec)
    io.write_trajectories_jsonl(trajectories, args.out_traj)
    io.write_ground_truth_csv(gt, args.out_gt)
    print(f"trajectories={len(trajectories)} groups={len(set(gt.labels.values()))}")
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        n_values = [int(p) for p in args.n.split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --n {args.n!r}: {exc}") from exc
    if not n_values:
        raise UsageError("--n must list at least one size")
    rows = scaling_report(n_values, args.k, _stream_config(args), seed=args.seed, repeats=args.repeats)
    io.write_scaling_tsv(rows, args.out)
    if args.plot:
        plotting.save_scaling_figure(rows, args.plot)
    print(f"sizes={len(rows)} max_work={rows[-1].work}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gravclust", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="single-sweep clustering of a trajectory stream")
    _add_input_flags(p)
    _add_engine_flags(p)
    p.add_argument("--converge", default=None, type=int, metavar="N",
                   help="also run up to N resampling sweeps (comparison mode)")
    p.add_argument("--out-assignments", required=True)
    p.add_argument("--out-clusters", required=True)
    p.add_argument("--save-state", default=None)
    p.add_argument("--plot", default=None, help="render a cluster scatter to this file")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("dem", help="windowed clustering with per-segment dynamics")
    _add_input_flags(p)
    _add_engine_flags(p)
    p.add_argument("--delta-t", required=True, type=int, help="segment duration in frames")
    p.add_argument("--out-dynamics", required=True)
    p.add_argument("--out-assignments", required=True)
    p.add_argument("--save-state", default=None)
    p.add_argument("--load-state", default=None)
    p.add_argument("--plot", default=None, help="render cluster-size dynamics to this file")
    p.set_defaults(func=cmd_dem)

    p = sub.add_parser("sweep-beta", help="cluster-count/accuracy table over a beta grid")
    _add_input_flags(p)
    p.add_argument("--betas", required=True, help='grid "a:b:step", list "x,y,z", or one value')
    p.add_argument("--gt", default=None, help="ground-truth CSV to score accuracy against")
    p.add_argument("--mode", default="map", choices=["map", "gibbs"])
    p.add_argument("--seed", default=0, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", default=None)
    p.set_defaults(func=cmd_sweep_beta, beta=1.0)

    p = sub.add_parser("eval", help="confusion metrics of predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="reference clusterers on the same features")
    p.add_argument("method", choices=["dbscan", "meanshift"])
    _add_input_flags(p)
    p.add_argument("--eps", default=None, type=float)
    p.add_argument("--min-samples", default=1, type=int)
    p.add_argument("--quantile", default=None, type=float)
    p.add_argument("--bandwidth", default=None, type=float)
    p.add_argument("--normalize", action="store_true", help="min-max normalize features first")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    p.add_argument("--spec", required=True, help="scene spec JSON")
    p.add_argument("--out-traj", required=True)
    p.add_argument("--out-gt", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="work/time scaling report on synthetic scenes")
    p.add_argument("--k", required=True, type=int, help="number of paths")
    p.add_argument("--n", required=True, help='stream sizes, e.g. "1000,2000,4000"')
    _add_engine_flags(p)
    p.add_argument("--repeats", default=1, type=int, help="timing repeats (min is reported)")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, InvalidParameter) as exc:
        # InvalidParameter out of a subcommand means a flag value was bad
        print(f"gravclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"gravclust: input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ContractViolation, NotFoundError) as exc:
        print(f"gravclust: invariant violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
