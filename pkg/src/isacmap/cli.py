"""Command-line entry points: run experiments, recompute metrics, replot maps."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .chanest import SaConfig
from .export import export_artifacts, landmark_map_from_trial, render_svg
from .fusion import DbscanParams
from .pipeline import RunConfig, run_pipeline


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isacmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the Monte-Carlo pipeline and export artifacts")
    run.add_argument("--scenario", default="desk", help="preset name (desk, paper) or scenario YAML path")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--oracle", action="store_true", help="bypass synthesis/estimation with true path parameters")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--eps", type=float, default=3.0, help="DBSCAN radius in meters")
    run.add_argument("--min-pts", type=int, default=5, help="DBSCAN core-point threshold")
    run.add_argument("--aug-x", type=int, default=4, help="horizontal spatial-augmentation order")
    run.add_argument("--aug-z", type=int, default=4, help="vertical spatial-augmentation order")
    run.add_argument("--snr-offset-db", type=float, default=0.0, help="shift receiver noise down by this many dB")

    metrics = sub.add_parser("metrics", help="recompute metrics from an exported results.json")
    metrics.add_argument("--results", required=True, help="path to results.json")

    plot = sub.add_parser("plot", help="regenerate the top-view SVG from an exported results.json")
    plot.add_argument("--results", required=True, help="path to results.json")
    plot.add_argument("--trial", type=int, default=0)
    plot.add_argument("--out", default=None, help="output SVG path (default: map_trial<N>.svg beside the JSON)")
    return parser


def _cmd_run(args) -> int:
    config = RunConfig(
        scenario=args.scenario,
        trials=args.trials,
        seed=args.seed,
        oracle=args.oracle,
        snr_offset_db=args.snr_offset_db,
        dbscan=DbscanParams(eps=args.eps, min_pts=args.min_pts),
        sa=SaConfig(aug_x=args.aug_x, aug_z=args.aug_z),
        out_dir=args.out,
    )
    result = run_pipeline(config)
    paths = export_artifacts(result, args.out)
    agg = result.aggregate
    print(f"trials: {config.trials}  snapshots: {sum(len(t.snapshots) for t in result.trials)}")
    if agg.mae is not None:
        print(f"UE MAE: {agg.mae:.3f} m  sub-meter rate: {agg.submeter_rate:.3f}")
    if agg.outlier_removal_rate is not None:
        print(f"IPs: {agg.ip_total}  removed: {agg.outlier_removal_rate:.3f}  within 2 m of facades: {agg.ip_within_2m_count}")
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return 0


def _recomputed_trial_metrics(trial_doc: dict, facade_params: list[dict]) -> dict:
    from .scene import Facade

    facades = [
        Facade(
            np.array(f["corner"]),
            np.array(f["edge_u"]),
            np.array(f["edge_v"]),
            np.array(f["normal"]),
            f["label"],
        )
        for f in facade_params
    ]
    errors = []
    for snap in trial_doc["snapshots"]:
        if snap["ue_est"] is not None:
            est = np.array([snap["ue_est"]["x"], snap["ue_est"]["y"]])
            true = np.array(snap["ue_true"][:2])
            errors.append(float(np.linalg.norm(est - true)))
    landmark_map = landmark_map_from_trial(trial_doc)
    within = 0
    for ip in landmark_map.pool:
        if facades and min(f.distance_to_point(ip.position) for f in facades) < 2.0:
            within += 1
    n_pool = len(landmark_map.pool)
    return {
        "trial": trial_doc["trial"],
        "n_ue_estimates": len(errors),
        "submeter_rate": float(np.mean([e < 1.0 for e in errors])) if errors else None,
        "mae": float(np.mean(errors)) if errors else None,
        "outlier_removal_rate": (len(landmark_map.removals) / n_pool) if n_pool else None,
        "ip_within_2m_count": within,
        "ip_total": n_pool,
    }


def _cmd_metrics(args) -> int:
    document = json.loads(Path(args.results).read_text())
    for trial_doc in document["trials"]:
        row = _recomputed_trial_metrics(trial_doc, document["scene"]["facades"])
        print(json.dumps(row, sort_keys=True))
    return 0


def _cmd_plot(args) -> int:
    results_path = Path(args.results)
    document = json.loads(results_path.read_text())
    svg = render_svg(document, trial=args.trial)
    out = Path(args.out) if args.out else results_path.parent / f"map_trial{args.trial}.svg"
    out.write_text(svg)
    print(f"plot: {out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "metrics":
        return _cmd_metrics(args)
    if args.command == "plot":
        return _cmd_plot(args)
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
