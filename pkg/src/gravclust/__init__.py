"""Streaming, order-sensitive trajectory clustering.

A nonparametric single-sweep engine (each arrival scored once against the
live clusters, with cluster pull growing with membership), a sliding-window
extension that emits per-segment scene dynamics, density/mode-seeking
baselines, evaluation metrics, and a synthetic-scene oracle.
"""

from .baselines import (
    DbscanConfig,
    MeanShiftConfig,
    bandwidth_from_quantile,
    dbscan,
    mean_shift,
    minmax_normalize,
)
from .engine import (
    ModelState,
    StreamConfig,
    assign,
    estimate_beta,
    refine_beta,
    resample,
    run_converged,
    run_stream,
    score,
    unassign,
)
from .errors import (
    ContractViolation,
    FormatError,
    InvalidParameter,
    NotFoundError,
    OrderingError,
)
from .evaluate import (
    ConfusionCounts,
    GroundTruth,
    ScalingRow,
    SweepRow,
    beta_sweep,
    confusion,
    match_clusters,
    scaling_report,
)
from .model import (
    Cluster,
    FeatureConfig,
    Observation,
    TrackPoint,
    Trajectory,
    euclidean,
    extract_features,
    observations_from_trajectories,
)
from .synth import (
    PathTemplate,
    Region,
    SceneSpec,
    generate_exact_scene,
    generate_scene,
    ring_scene_spec,
    sample_from_model,
)
from .windowed import (
    SegmentCluster,
    SegmentStats,
    WindowConfig,
    WindowedState,
    advance_segment,
    detect_shift,
    dynamics_series,
    ingest,
    run_windowed,
)

__version__ = "0.1.0"
