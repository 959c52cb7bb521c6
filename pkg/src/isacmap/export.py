"""Artifact export: results JSON, metric CSV tables, and top-view SVG maps.

The JSON export is fully deterministic (sorted keys, shortest-round-trip
float repr), so identical run configurations produce byte-identical files;
``landmark_map_from_trial`` reconstructs a LandmarkMap from the exported
structure exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .fusion import Cluster, Hull, LandmarkMap, Removal
from .pipeline import RunResult, TrialResult
from .posmap import IpEstimate

SCHEMA_VERSION = 1


def _vec(a) -> list:
    return [float(x) for x in np.asarray(a).ravel()]


def _complex(c: complex) -> list:
    return [float(np.real(c)), float(np.imag(c))]


def _snapshot_dict(record) -> dict:
    est = record.ue_estimate
    return {
        "bs_id": record.bs_id,
        "ue_id": record.ue_id,
        "time_step": record.time_step,
        "ue_true": _vec(record.ue_true),
        "ue_est": None
        if est is None
        else {
            "x": est.x,
            "y": est.y,
            "z": est.z,
            "converged": est.converged,
            "objective": est.objective,
        },
        "n_paths_true": len(record.true_paths),
        "n_paths_estimated": len(record.estimated_paths),
        "discarded_paths": [[i, reason] for i, reason in record.output.discarded_paths],
        "error": record.error,
        "true_single_bounce_ips": [
            {"path_index": i, "position": _vec(p.true_ips[0])}
            for i, p in enumerate(record.true_paths)
            if p.bounce_order == 1
        ],
    }


def _ip_dict(index: int, ip: IpEstimate, status: str, removal: Removal | None) -> dict:
    out = {
        "index": index,
        "position": _vec(ip.position),
        "bs_id": ip.bs_id,
        "ue_id": ip.ue_id,
        "time_step": ip.time_step,
        "path_index": ip.path_index,
        "ray_parameter": ip.ray_parameter,
        "status": status,
    }
    if removal is not None:
        out["reason"] = removal.reason
        out["occluder_label"] = removal.occluder_label
        out["segment"] = removal.segment
    return out


def _hull_dict(hull: Hull) -> dict:
    return {
        "label": hull.label,
        "degeneracy": hull.degeneracy,
        "vertices": [_vec(v) for v in hull.vertices],
        "faces": [[int(i) for i in f] for f in hull.faces],
        "face_normals": [_vec(n) for n in hull.face_normals],
        "face_offsets": _vec(hull.face_offsets),
    }


def _map_dict(landmark_map: LandmarkMap) -> dict:
    removal_by_index = {r.index: r for r in landmark_map.removals}
    retained = set(int(i) for i in landmark_map.retained_indices)
    ips = []
    for i, ip in enumerate(landmark_map.pool):
        status = "retained" if i in retained else "removed"
        ips.append(_ip_dict(i, ip, status, removal_by_index.get(i)))
    return {
        "ips": ips,
        "retained_indices": [int(i) for i in landmark_map.retained_indices],
        "hulls": [_hull_dict(h) for h in landmark_map.hulls],
        "clusters": [
            {"label": c.label, "indices": [int(i) for i in c.indices]}
            for c in landmark_map.clusters
        ],
    }


def _trial_dict(trial: TrialResult) -> dict:
    return {
        "trial": trial.index,
        "snapshots": [_snapshot_dict(r) for r in trial.snapshots],
        "map": _map_dict(trial.landmark_map),
        "metrics": trial.metrics.as_dict(),
    }


def _scene_dict(result: RunResult) -> dict:
    scene = result.scene
    return {
        "facades": [
            {
                "corner": _vec(f.corner),
                "edge_u": _vec(f.edge_u),
                "edge_v": _vec(f.edge_v),
                "normal": _vec(f.normal),
                "label": f.label,
            }
            for f in scene.facades
        ],
        "bs": [
            {"id": b.id, "position": _vec(b.position), "orientation": _vec(b.orientation)}
            for b in scene.bs_states
        ],
        "ue_height": scene.ue_height,
    }


def _config_dict(result: RunResult) -> dict:
    c = result.config
    return {
        "scenario": str(c.scenario),
        "trials": c.trials,
        "seed": c.seed,
        "oracle": c.oracle,
        "oracle_sigmas": None
        if c.oracle_sigmas is None
        else [c.oracle_sigmas.sigma_range, c.oracle_sigmas.sigma_az, c.oracle_sigmas.sigma_el],
        "snr_offset_db": c.snr_offset_db,
        "dbscan": {"eps": c.dbscan.eps, "min_pts": c.dbscan.min_pts},
        "sa": {"aug_x": c.sa.aug_x, "aug_z": c.sa.aug_z},
        "measurement_sigmas": [
            c.measurement_sigmas.sigma_range,
            c.measurement_sigmas.sigma_az,
            c.measurement_sigmas.sigma_el,
        ],
        "fusion_use_true_ue": c.fusion_use_true_ue,
    }


def results_document(result: RunResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": _config_dict(result),
        "scenario": result.scenario,
        "scene": _scene_dict(result),
        "trials": [_trial_dict(t) for t in result.trials],
        "aggregate": result.aggregate.as_dict(),
    }


def export_artifacts(result: RunResult, out_dir: str | Path) -> dict[str, Path]:
    """Write results.json, metrics.csv, and a trial-0 top-view SVG map.

    Returns the paths of the written files keyed by artifact kind.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    document = results_document(result)

    json_path = out / "results.json"
    json_path.write_text(dumps_canonical(document))

    csv_path = out / "metrics.csv"
    _write_metrics_csv(result, csv_path)

    svg_path = out / "map_trial0.svg"
    svg_path.write_text(render_svg(document, trial=0))
    return {"results": json_path, "metrics": csv_path, "plot": svg_path}


def dumps_canonical(document: dict) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


_CSV_FIELDS = [
    "trial",
    "n_ue_estimates",
    "submeter_rate",
    "mae",
    "outlier_removal_rate",
    "ip_within_2m_count",
    "ip_total",
    "n_ips_retained",
    "n_ips_removed",
]


def _write_metrics_csv(result: RunResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for trial in result.trials:
            m = trial.metrics.as_dict()
            writer.writerow([trial.index] + [m[k] for k in _CSV_FIELDS[1:]])
        agg = result.aggregate.as_dict()
        writer.writerow(["aggregate"] + [agg[k] for k in _CSV_FIELDS[1:]])


def landmark_map_from_trial(trial_doc: dict) -> LandmarkMap:
    """Rebuild a LandmarkMap from one exported trial document."""
    pool = []
    removals = []
    for entry in trial_doc["map"]["ips"]:
        pool.append(
            IpEstimate(
                position=np.array(entry["position"]),
                bs_id=entry["bs_id"],
                ue_id=entry["ue_id"],
                time_step=entry["time_step"],
                path_index=entry["path_index"],
                ray_parameter=entry["ray_parameter"],
            )
        )
        if entry["status"] == "removed":
            removals.append(
                Removal(
                    entry["index"],
                    entry["reason"],
                    entry.get("occluder_label"),
                    entry.get("segment"),
                )
            )
    hulls = [
        Hull(
            vertices=np.array(h["vertices"]).reshape(-1, 3),
            faces=np.array(h["faces"], dtype=int).reshape(-1, 3),
            face_normals=np.array(h["face_normals"]).reshape(-1, 3),
            face_offsets=np.array(h["face_offsets"]),
            degeneracy=h["degeneracy"],
            label=h["label"],
        )
        for h in trial_doc["map"]["hulls"]
    ]
    clusters = [
        Cluster(c["label"], np.array(c["indices"], dtype=int))
        for c in trial_doc["map"]["clusters"]
    ]
    return LandmarkMap(
        pool=pool,
        retained_indices=np.array(trial_doc["map"]["retained_indices"], dtype=int),
        removals=removals,
        hulls=hulls,
        clusters=clusters,
    )


# ---------------------------------------------------------------------------
# SVG rendering (x-y top view, mirroring the 2-D map figures)
# ---------------------------------------------------------------------------

_SVG_STYLE = (
    ".facade{stroke:#caa002;stroke-width:0.6}"
    ".hull{stroke:#0072bd;fill:#0072bd;fill-opacity:0.15;stroke-width:0.4}"
    ".ip-retained{fill:#2a9d2a}"
    ".ip-removed{fill:#d04040;fill-opacity:0.55}"
    ".ip-true{fill:none;stroke:#555;stroke-width:0.25}"
    ".bs{fill:#222}"
    ".ue-true{stroke:#888;stroke-width:0.3;fill:none}"
    ".ue-est{fill:#7a2aa0}"
)


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def render_svg(document: dict, trial: int = 0) -> str:
    """Deterministic top-view map of one trial: facades, IPs, hull outlines."""
    trials = document["trials"]
    if trial >= len(trials):
        raise ValueError(f"trial {trial} not in document ({len(trials)} trials)")
    tdoc = trials[trial]
    scene = document["scene"]

    xs, ys = [], []
    for f in scene["facades"]:
        c = f["corner"]
        e = f["edge_u"]
        xs += [c[0], c[0] + e[0]]
        ys += [c[1], c[1] + e[1]]
    for b in scene["bs"]:
        xs.append(b["position"][0])
        ys.append(b["position"][1])
    for ip in tdoc["map"]["ips"]:
        xs.append(ip["position"][0])
        ys.append(ip["position"][1])
    for snap in tdoc["snapshots"]:
        xs.append(snap["ue_true"][0])
        ys.append(snap["ue_true"][1])
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    pad = 5.0
    x0, x1 = min(xs) - pad, max(xs) + pad
    y0, y1 = min(ys) - pad, max(ys) + pad

    # map coordinates are drawn with y negated so north points up
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{_fmt(x0)} {_fmt(-y1)} {_fmt(x1 - x0)} {_fmt(y1 - y0)}" width="800" height="800">',
        f"<style>{_SVG_STYLE}</style>",
        "<g>",
    ]

    def pt(x, y):
        return f"{_fmt(x)},{_fmt(-y)}"

    for f in scene["facades"]:
        c, e = f["corner"], f["edge_u"]
        parts.append(
            f'<line class="facade" x1="{_fmt(c[0])}" y1="{_fmt(-c[1])}" x2="{_fmt(c[0] + e[0])}" y2="{_fmt(-(c[1] + e[1]))}"/>'
        )
    for h in tdoc["map"]["hulls"]:
        verts = [(v[0], v[1]) for v in h["vertices"]]
        outline = _top_view_outline(verts)
        if len(outline) >= 2:
            points = " ".join(pt(x, y) for x, y in outline)
            parts.append(f'<polygon class="hull" points="{points}"/>')
    for snap in tdoc["snapshots"]:
        for item in snap["true_single_bounce_ips"]:
            x, y = item["position"][0], item["position"][1]
            parts.append(f'<circle class="ip-true" cx="{_fmt(x)}" cy="{_fmt(-y)}" r="0.8"/>')
    for ip in tdoc["map"]["ips"]:
        cls = "ip-retained" if ip["status"] == "retained" else "ip-removed"
        x, y = ip["position"][0], ip["position"][1]
        parts.append(f'<circle class="{cls}" cx="{_fmt(x)}" cy="{_fmt(-y)}" r="0.5"/>')
    ue_pts = {}
    for snap in tdoc["snapshots"]:
        ue_pts.setdefault(snap["ue_id"], {})[snap["time_step"]] = snap["ue_true"]
        if snap["ue_est"] is not None:
            parts.append(
                f'<circle class="ue-est" cx="{_fmt(snap["ue_est"]["x"])}" cy="{_fmt(-snap["ue_est"]["y"])}" r="0.4"/>'
            )
    for ue_id in sorted(ue_pts):
        track = [ue_pts[ue_id][k] for k in sorted(ue_pts[ue_id])]
        points = " ".join(pt(p[0], p[1]) for p in track)
        parts.append(f'<polyline class="ue-true" points="{points}"/>')
    for b in scene["bs"]:
        x, y = b["position"][0], b["position"][1]
        parts.append(
            f'<path class="bs" d="M {_fmt(x)} {_fmt(-y - 1.2)} L {_fmt(x - 1.0)} {_fmt(-y + 0.8)} L {_fmt(x + 1.0)} {_fmt(-y + 0.8)} Z"/>'
        )
    parts.append("</g></svg>")
    return "\n".join(parts) + "\n"


def _top_view_outline(points_xy: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """2-D convex outline of hull vertices projected on the x-y plane."""
    pts = np.unique(np.asarray(points_xy, dtype=float), axis=0)
    if len(pts) <= 2:
        return [tuple(p) for p in pts]
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(pts)
        return [tuple(pts[i]) for i in hull.vertices]
    except QhullError:
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        return [tuple(pts[i]) for i in order]
