"""Uplink ISAC positioning and mapping: simulation, estimation, and fusion."""

from .chanest import (
    CpdOptions,
    EstimatedPath,
    SaConfig,
    cpd_als,
    estimate_channel,
    estimate_gains,
    estimate_model_order,
    extract_path_params,
    spatial_augment,
)
from .fusion import (
    Cluster,
    DbscanParams,
    Hull,
    LandmarkMap,
    build_landmark_map,
    cluster_ips,
    convex_hull,
    prune_occluded,
    segment_intersects_hull,
)
from .pipeline import MetricsReport, RunConfig, RunResult, compute_metrics, run_pipeline
from .posmap import (
    IpEstimate,
    LosMeasurement,
    MeasurementSigmas,
    UePositionEstimate,
    bearing_vector,
    estimate_ip,
    locate_ue,
    measurement_of,
    process_snapshot,
    select_los,
)
from .scene import (
    BsState,
    Facade,
    Scene,
    TruePath,
    UeState,
    build_scene,
    sample_trajectories,
    trace_paths,
)
from .signal import ArrayConfig, WaveformConfig, delay_steering, steering_vector, synthesize_snapshot

__version__ = "0.1.0"
