"""Monte-Carlo orchestration of the full positioning-and-mapping pipeline.

One trial runs, per BS-UE snapshot: ground-truth path generation, OFDM tensor
synthesis, tensor channel estimation, LoS positioning, and per-path IP
mapping; per-BS IPs are then pooled and fused into a landmark map.  Oracle
mode bypasses synthesis and estimation, feeding true path parameters
(optionally perturbed) straight into positioning, which isolates the geometry
stages for fast testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import presets
from .chanest import CpdOptions, EstimatedPath, SaConfig, estimate_channel
from .fusion import DbscanParams, LandmarkMap, build_landmark_map
from .posmap import MeasurementSigmas, SnapshotOutput, process_snapshot
from .scene import Scene, TruePath, UeState, build_scene, sample_trajectories, trace_paths
from .signal import synthesize_snapshot


@dataclass
class RunConfig:
    """Everything needed to reproduce one experiment run."""

    scenario: str = "desk"
    trials: int = 1
    seed: int = 0
    oracle: bool = False
    oracle_sigmas: MeasurementSigmas | None = None  # perturbation of oracle params; None = exact
    snr_offset_db: float = 0.0
    dbscan: DbscanParams = field(default_factory=DbscanParams)
    sa: SaConfig = field(default_factory=SaConfig)
    measurement_sigmas: MeasurementSigmas = field(default_factory=MeasurementSigmas)
    cpd: CpdOptions = field(default_factory=CpdOptions)
    fusion_use_true_ue: bool = False  # oracle switch for the UE end of visibility segments
    out_dir: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass
class SnapshotRecord:
    """Aligned estimate/truth record for one (BS, UE, time-step) snapshot."""

    bs_id: int
    ue_id: int
    time_step: int
    ue_true: np.ndarray
    output: SnapshotOutput
    true_paths: list[TruePath]
    estimated_paths: list[EstimatedPath]
    error: str | None = None

    @property
    def ue_estimate(self):
        return self.output.ue_estimate if self.output else None


@dataclass
class MetricsReport:
    """Positioning and mapping quality metrics for one trial (or aggregate)."""

    empty: bool
    n_ue_estimates: int
    submeter_rate: float | None
    mae: float | None
    outlier_removal_rate: float | None
    ip_within_2m_count: int
    ip_total: int
    per_bs: dict[int, dict]
    n_ips_retained: int = 0
    n_ips_removed: int = 0

    def as_dict(self) -> dict:
        return {
            "empty": self.empty,
            "n_ue_estimates": self.n_ue_estimates,
            "submeter_rate": self.submeter_rate,
            "mae": self.mae,
            "outlier_removal_rate": self.outlier_removal_rate,
            "ip_within_2m_count": self.ip_within_2m_count,
            "ip_total": self.ip_total,
            "n_ips_retained": self.n_ips_retained,
            "n_ips_removed": self.n_ips_removed,
            "per_bs": {str(k): v for k, v in sorted(self.per_bs.items())},
        }


@dataclass
class TrialResult:
    index: int
    snapshots: list[SnapshotRecord]
    landmark_map: LandmarkMap
    metrics: MetricsReport


@dataclass
class RunResult:
    config: RunConfig
    scenario: dict
    scene: Scene
    trials: list[TrialResult]
    aggregate: MetricsReport


def _horizontal_error(record: SnapshotRecord) -> float | None:
    est = record.ue_estimate
    if est is None:
        return None
    return float(np.linalg.norm(est.position[:2] - record.ue_true[:2]))


def compute_metrics(
    snapshots: list[SnapshotRecord],
    landmark_map: LandmarkMap,
    scene: Scene,
) -> MetricsReport:
    """Positioning accuracy, facade proximity, and removal-rate metrics.

    The sub-meter rate and MAE are over horizontal UE errors of all snapshots
    with a position estimate; facade distance is point-to-nearest-facade-
    rectangle over the full (pre-removal) IP pool.  Rates are None (and the
    report flagged empty) when there is nothing to aggregate.
    """
    errors = [e for e in (_horizontal_error(r) for r in snapshots) if e is not None]
    per_bs: dict[int, dict] = {}
    for bs in scene.bs_states:
        bs_errors = [
            e
            for r in snapshots
            if r.bs_id == bs.id
            for e in [_horizontal_error(r)]
            if e is not None
        ]
        if bs_errors:
            per_bs[bs.id] = {
                "n": len(bs_errors),
                "mae": float(np.mean(bs_errors)),
                "submeter_rate": float(np.mean([e < 1.0 for e in bs_errors])),
            }

    pool = landmark_map.pool
    within = 0
    if scene.facades:
        for ip in pool:
            dist = min(f.distance_to_point(ip.position) for f in scene.facades)
            if dist < 2.0:
                within += 1

    n_removed = len(landmark_map.removals)
    n_retained = len(landmark_map.retained_indices)
    empty = not errors and not pool
    return MetricsReport(
        empty=empty,
        n_ue_estimates=len(errors),
        submeter_rate=float(np.mean([e < 1.0 for e in errors])) if errors else None,
        mae=float(np.mean(errors)) if errors else None,
        outlier_removal_rate=(n_removed / len(pool)) if pool else None,
        ip_within_2m_count=within,
        ip_total=len(pool),
        per_bs=per_bs,
        n_ips_retained=n_retained,
        n_ips_removed=n_removed,
    )


def _oracle_paths(
    true_paths: list[TruePath],
    sigmas: MeasurementSigmas | None,
    rng: np.random.Generator,
) -> list[EstimatedPath]:
    out = []
    for p in true_paths:
        if sigmas is None:
            out.append(EstimatedPath(p.delay_range, p.aoa_az, p.aoa_el, p.gain))
        else:
            out.append(
                EstimatedPath(
                    p.delay_range + sigmas.sigma_range * rng.standard_normal(),
                    p.aoa_az + sigmas.sigma_az * rng.standard_normal(),
                    p.aoa_el + sigmas.sigma_el * rng.standard_normal(),
                    p.gain,
                )
            )
    return out


def run_snapshot(
    scene: Scene,
    config: RunConfig,
    trial: int,
    bs,
    ue: UeState,
    array,
    waveform,
) -> SnapshotRecord | None:
    """One BS-UE snapshot; None when the UE is outside the BS coverage."""
    rng_paths = np.random.default_rng((config.seed, trial, bs.id, ue.id, ue.time_step, 0))
    true_paths = trace_paths(scene, bs, ue, rng=rng_paths)
    if not true_paths:
        return None
    estimated: list[EstimatedPath] = []
    error = None
    try:
        if config.oracle:
            rng_meas = np.random.default_rng((config.seed, trial, bs.id, ue.id, ue.time_step, 1))
            estimated = _oracle_paths(true_paths, config.oracle_sigmas, rng_meas)
        else:
            rng_noise = np.random.default_rng((config.seed, trial, bs.id, ue.id, ue.time_step, 2))
            noise_var = waveform.noise_variance_mw * 10.0 ** (-config.snr_offset_db / 10.0)
            tensor = synthesize_snapshot(true_paths, array, waveform, seed=rng_noise, noise_variance=noise_var)
            opts = replace(config.cpd, seed=(config.seed, trial, bs.id, ue.id, ue.time_step, 3))
            estimated = estimate_channel(tensor, config.sa, array, waveform, opts=opts)
    except Exception as exc:  # snapshot failures must not abort the trial
        error = f"{type(exc).__name__}: {exc}"
    output = process_snapshot(
        estimated, bs, ue.id, ue.time_step, scene.ue_height, config.measurement_sigmas
    )
    return SnapshotRecord(
        bs_id=bs.id,
        ue_id=ue.id,
        time_step=ue.time_step,
        ue_true=ue.position,
        output=output,
        true_paths=true_paths,
        estimated_paths=estimated,
        error=error,
    )


def run_trial(scene: Scene, config: RunConfig, trial: int, array, waveform, trajectories) -> TrialResult:
    snapshots: list[SnapshotRecord] = []
    for ue_id in sorted(trajectories):
        for ue_state in trajectories[ue_id]:
            for bs in scene.bs_states:
                record = run_snapshot(scene, config, trial, bs, ue_state, array, waveform)
                if record is not None:
                    snapshots.append(record)

    pool = []
    ue_positions: dict[tuple[int, int, int], np.ndarray] = {}
    true_ue: dict[tuple[int, int, int], np.ndarray] = {}
    for record in snapshots:
        true_ue[(record.bs_id, record.ue_id, record.time_step)] = record.ue_true
        if record.ue_estimate is not None:
            ue_positions[(record.bs_id, record.ue_id, record.time_step)] = record.ue_estimate.position
            pool.extend(record.output.ips)
    bs_positions = {bs.id: bs.position for bs in scene.bs_states}
    lookup = true_ue if config.fusion_use_true_ue else ue_positions
    landmark_map = build_landmark_map(pool, bs_positions, lookup, config.dbscan)
    metrics = compute_metrics(snapshots, landmark_map, scene)
    return TrialResult(trial, snapshots, landmark_map, metrics)


def run_pipeline(config: RunConfig) -> RunResult:
    """Execute all Monte-Carlo trials for a run configuration."""
    scenario = presets.scenario_config(config.scenario)
    scene = build_scene(scenario)
    trajectories = sample_trajectories(scene)
    array = presets.array_config(scenario)
    waveform = presets.waveform_config(scenario)
    trials = [
        run_trial(scene, config, t, array, waveform, trajectories)
        for t in range(config.trials)
    ]
    all_snapshots = [r for t in trials for r in t.snapshots]
    aggregate = _aggregate_metrics(trials, all_snapshots, scene)
    return RunResult(config, scenario, scene, trials, aggregate)


def _aggregate_metrics(trials: list[TrialResult], snapshots: list[SnapshotRecord], scene: Scene) -> MetricsReport:
    errors = [e for e in (_horizontal_error(r) for r in snapshots) if e is not None]
    total_ips = sum(t.metrics.ip_total for t in trials)
    removed = sum(t.metrics.n_ips_removed for t in trials)
    retained = sum(t.metrics.n_ips_retained for t in trials)
    within = sum(t.metrics.ip_within_2m_count for t in trials)
    per_bs: dict[int, dict] = {}
    for bs in scene.bs_states:
        bs_errors = [
            e
            for r in snapshots
            if r.bs_id == bs.id
            for e in [_horizontal_error(r)]
            if e is not None
        ]
        if bs_errors:
            per_bs[bs.id] = {
                "n": len(bs_errors),
                "mae": float(np.mean(bs_errors)),
                "submeter_rate": float(np.mean([e < 1.0 for e in bs_errors])),
            }
    return MetricsReport(
        empty=not errors and total_ips == 0,
        n_ue_estimates=len(errors),
        submeter_rate=float(np.mean([e < 1.0 for e in errors])) if errors else None,
        mae=float(np.mean(errors)) if errors else None,
        outlier_removal_rate=(removed / total_ips) if total_ips else None,
        ip_within_2m_count=within,
        ip_total=total_ips,
        per_bs=per_bs,
        n_ips_retained=retained,
        n_ips_removed=removed,
    )
