"""Fusion-center post-processing of pooled interaction points.

Three phases: density-based clustering of the global IP pool (outliers are
dropped), convex-hull extraction per cluster, and visibility-based outlier
removal, where an IP is discarded if the open segment from its BS or its UE
to the IP crosses any other cluster's hull.  Surviving IPs are re-clustered
and re-hulled to form the final landmark map.

Determinism contract: clustering scans points in pool order, border points
join the cluster of their lowest-index core neighbor, and cluster labels are
assigned in order of each cluster's first core point, so identical pools and
parameters always produce identical maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull as _SciPyHull
from scipy.spatial import QhullError, cKDTree

from .posmap import IpEstimate

# Clusters thinner than this along a principal axis are treated as degenerate
# (planar / collinear / point) rather than solid.
_DEGENERACY_TOL_M = 1e-6
# Half-thickness used to inflate degenerate hulls for occlusion tests.
_INFLATE_HALF_THICKNESS_M = 0.05
# Segments are clipped by this amount at both endpoints before occlusion
# testing so an IP is never occluded by a hull it touches.
_SEGMENT_CLIP_M = 1e-6


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 3.0
    min_pts: int = 5

    def __post_init__(self):
        if self.eps <= 0 or self.min_pts < 1:
            raise ValueError("eps must be > 0 and min_pts >= 1")


@dataclass
class Cluster:
    label: int
    indices: np.ndarray  # indices into the pool, ascending

    def __len__(self) -> int:
        return len(self.indices)


def cluster_ips(points: np.ndarray, params: DbscanParams) -> tuple[list[Cluster], np.ndarray]:
    """Euclidean DBSCAN returning (clusters, outlier indices).

    A core point has at least min_pts points (itself included) within eps.
    Clusters are the connected components of core points under eps-proximity;
    border points attach to the cluster of their lowest-index core neighbor.
    """
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return [], np.array([], dtype=int)
    n = points.shape[0]
    tree = cKDTree(points)
    neighbors = tree.query_ball_point(points, params.eps)
    core = np.array([len(nb) >= params.min_pts for nb in neighbors])

    labels = np.full(n, -1, dtype=int)
    next_label = 0
    for start in range(n):
        if not core[start] or labels[start] != -1:
            continue
        # flood fill over core points reachable from `start`
        labels[start] = next_label
        queue = [start]
        while queue:
            point = queue.pop()
            for nb in neighbors[point]:
                if core[nb] and labels[nb] == -1:
                    labels[nb] = next_label
                    queue.append(nb)
        next_label += 1

    for i in range(n):
        if core[i] or labels[i] != -1:
            continue
        core_nb = [nb for nb in sorted(neighbors[i]) if core[nb]]
        if core_nb:
            labels[i] = labels[core_nb[0]]

    clusters = [
        Cluster(label, np.flatnonzero(labels == label)) for label in range(next_label)
    ]
    outliers = np.flatnonzero(labels == -1)
    return clusters, outliers


@dataclass
class Hull:
    """Convex hull of a cluster, possibly lower-dimensional.

    ``degeneracy`` is "none" for a solid 3-D hull, else "planar", "segment",
    or "point".  ``face_normals``/``face_offsets`` describe the outward
    half-spaces n.x <= d of the solid hull; for degenerate hulls they describe
    the inflated prism used by occlusion tests.
    """

    vertices: np.ndarray  # (m, 3); subset of the input points
    faces: np.ndarray  # (f, 3) vertex indices, outward CCW; empty if degenerate
    face_normals: np.ndarray
    face_offsets: np.ndarray
    degeneracy: str = "none"
    label: int = -1
    _inflated: "Hull | None" = field(default=None, repr=False)

    @property
    def occlusion_hull(self) -> "Hull":
        return self._inflated if self._inflated is not None else self


def _principal_deviations(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Principal axes and the max |deviation| of the points along each."""
    center = points.mean(axis=0)
    rel = points - center
    _, _, vt = np.linalg.svd(rel, full_matrices=True)
    dev = np.abs(rel @ vt.T).max(axis=0) if len(points) > 1 else np.zeros(3)
    return vt, dev


def convex_hull(points: np.ndarray, label: int = -1) -> Hull:
    """Convex hull of >= 1 points with graceful degeneracy handling.

    Clusters that are flat within 1e-6 m along a principal axis produce a
    planar polygon, segment, or point hull; those carry an inflated 0.1 m
    thick prism used for occlusion testing, since a zero-thickness hull can
    never occlude a segment.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
        raise ValueError("convex_hull expects an (n, 3) array with n >= 1")
    axes, dev = _principal_deviations(points)
    rank = int(np.count_nonzero(dev > _DEGENERACY_TOL_M))
    if rank == 3:
        try:
            return _build_solid(points, label)
        except QhullError:
            rank = 2  # numerically flat for qhull despite the deviation test
    return _build_degenerate(points, axes, rank, label)


def _build_solid(points: np.ndarray, label: int) -> Hull:
    hull = _SciPyHull(points)
    vertex_ids = np.sort(hull.vertices)
    remap = {v: i for i, v in enumerate(vertex_ids)}
    vertices = points[vertex_ids]
    faces = np.array([[remap[v] for v in s] for s in hull.simplices], dtype=int)
    normals = hull.equations[:, :3].copy()
    offsets = -hull.equations[:, 3].copy()
    for i, tri in enumerate(faces):
        a, b, c = vertices[tri]
        if np.cross(b - a, c - a) @ normals[i] < 0:
            faces[i] = tri[[2, 1, 0]]
    return Hull(vertices, faces, normals, offsets, "none", label)


def _build_degenerate(points: np.ndarray, axes: np.ndarray, rank: int, label: int) -> Hull:
    center = points.mean(axis=0)
    if rank == 0:
        vertices = points[:1].copy()
        degeneracy = "point"
    elif rank == 1:
        coords = (points - center) @ axes[0]
        vertices = points[[int(np.argmin(coords)), int(np.argmax(coords))]]
        degeneracy = "segment"
    else:
        uv = (points - center) @ axes[:2].T
        try:
            # 2-D qhull vertices come in counterclockwise cyclic order; keep
            # that order so polygon edges are consecutive vertex pairs
            vertex_ids = _SciPyHull(uv).vertices
        except QhullError:
            vertex_ids = np.arange(len(points))
        vertices = points[vertex_ids]
        degeneracy = "planar"
    hull = Hull(
        vertices,
        np.zeros((0, 3), dtype=int),
        np.zeros((0, 3)),
        np.zeros(0),
        degeneracy,
        label,
    )
    # inflate along the deficient principal directions for occlusion testing
    offsets_axes = axes[rank:]
    inflated_pts = np.concatenate(
        [points + _INFLATE_HALF_THICKNESS_M * ax for ax in offsets_axes]
        + [points - _INFLATE_HALF_THICKNESS_M * ax for ax in offsets_axes]
    )
    try:
        hull._inflated = _build_solid(inflated_pts, label)
    except QhullError:
        hull._inflated = None
    return hull


def hull_violations(hull: Hull, points: np.ndarray) -> np.ndarray:
    """Max signed face-plane violation per point (<= 0 means inside or on).

    For degenerate hulls the distance to the lower-dimensional hull is used.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if hull.degeneracy == "none":
        return (points @ hull.face_normals.T - hull.face_offsets).max(axis=1)
    if hull.degeneracy == "point":
        return np.linalg.norm(points - hull.vertices[0], axis=1)
    if hull.degeneracy == "segment":
        a, b = hull.vertices
        ab = b - a
        t = np.clip((points - a) @ ab / (ab @ ab), 0.0, 1.0)
        return np.linalg.norm(points - (a + t[:, None] * ab), axis=1)
    # planar polygon: distance from plane plus in-plane hull violation
    verts = hull.vertices
    center = verts.mean(axis=0)
    _, _, vt = np.linalg.svd(verts - center, full_matrices=True)
    normal = vt[2]
    plane_dist = np.abs((points - center) @ normal)
    uv_pts = (points - center) @ vt[:2].T
    uv_verts = (verts - center) @ vt[:2].T
    m = len(uv_verts)
    in_plane = np.full(len(points), -np.inf)
    centroid = uv_verts.mean(axis=0)
    for i in range(m):
        a, b = uv_verts[i], uv_verts[(i + 1) % m]
        edge = b - a
        n2 = np.array([edge[1], -edge[0]])
        norm = np.linalg.norm(n2)
        if norm == 0:
            continue
        n2 = n2 / norm
        if (centroid - a) @ n2 > 0:
            n2 = -n2
        in_plane = np.maximum(in_plane, (uv_pts - a) @ n2)
    return np.maximum(plane_dist, in_plane)


def segment_intersects_hull(a, b, hull: Hull) -> bool:
    """Whether the open segment a->b (clipped 1e-6 m at each end) meets the hull.

    The closed hull volume is used; degenerate hulls test against their
    inflated prism.  Implemented as parametric clipping of the segment
    against the hull's face half-spaces.
    """
    test = hull.occlusion_hull
    if test is None or test.degeneracy != "none":
        return False
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length <= 2 * _SEGMENT_CLIP_M:
        return False
    t_lo = _SEGMENT_CLIP_M / length
    t_hi = 1.0 - t_lo
    direction = b - a
    for normal, offset in zip(test.face_normals, test.face_offsets):
        fa = float(normal @ a) - offset
        slope = float(normal @ direction)
        if slope == 0.0:
            if fa > 0.0:
                return False
            continue
        t_cross = -fa / slope
        if slope > 0.0:
            t_hi = min(t_hi, t_cross)
        else:
            t_lo = max(t_lo, t_cross)
        if t_lo > t_hi:
            return False
    return True


@dataclass
class Removal:
    index: int  # index into the pool
    reason: str  # "dbscan-outlier" | "occluded"
    occluder_label: int | None = None
    segment: str | None = None  # "bs" or "ue"


@dataclass
class LandmarkMap:
    """Final fused map plus the ledger of removed interaction points."""

    pool: list[IpEstimate]
    retained_indices: np.ndarray
    removals: list[Removal]
    hulls: list[Hull]
    clusters: list[Cluster]  # final clusters over the retained subset


def prune_occluded(
    pool: list[IpEstimate],
    clusters: list[Cluster],
    hulls: list[Hull],
    bs_positions: dict[int, np.ndarray],
    ue_positions: dict[tuple[int, int, int], np.ndarray],
    params: DbscanParams,
    outliers: np.ndarray | None = None,
) -> LandmarkMap:
    """Visibility-based outlier removal and final map construction.

    ``ue_positions`` maps (bs_id, ue_id, time_step) to the UE position used
    for that snapshot (estimated in normal operation, ground truth in oracle
    checks).  DBSCAN outliers are removed outright; a clustered IP is removed
    if its BS or UE segment crosses any other cluster's hull.  Retained IPs
    are re-clustered and re-hulled with the same parameters.
    """
    removals = []
    if outliers is not None:
        removals.extend(Removal(int(i), "dbscan-outlier") for i in outliers)

    label_of: dict[int, int] = {}
    for cluster in clusters:
        for i in cluster.indices:
            label_of[int(i)] = cluster.label

    retained = []
    for cluster in clusters:
        for i in cluster.indices:
            i = int(i)
            ip = pool[i]
            if ip.bs_id not in bs_positions:
                raise KeyError(f"IP {i}: unknown BS id {ip.bs_id}")
            key = (ip.bs_id, ip.ue_id, ip.time_step)
            if key not in ue_positions:
                raise KeyError(f"IP {i}: no UE position for snapshot {key}")
            bs_pos = bs_positions[ip.bs_id]
            ue_pos = ue_positions[key]
            removal = None
            for hull in hulls:
                if hull.label == label_of[i]:
                    continue
                if segment_intersects_hull(bs_pos, ip.position, hull):
                    removal = Removal(i, "occluded", hull.label, "bs")
                    break
                if segment_intersects_hull(ue_pos, ip.position, hull):
                    removal = Removal(i, "occluded", hull.label, "ue")
                    break
            if removal is None:
                retained.append(i)
            else:
                removals.append(removal)

    retained = np.array(sorted(retained), dtype=int)
    removals.sort(key=lambda r: r.index)
    if len(retained):
        final_clusters, _ = cluster_ips(np.array([pool[i].position for i in retained]), params)
        # re-express final cluster indices in pool coordinates
        final_clusters = [
            Cluster(c.label, retained[c.indices]) for c in final_clusters
        ]
        final_hulls = [
            convex_hull(np.array([pool[i].position for i in c.indices]), c.label)
            for c in final_clusters
        ]
    else:
        final_clusters, final_hulls = [], []
    return LandmarkMap(pool, retained, removals, final_hulls, final_clusters)


def build_landmark_map(
    pool: list[IpEstimate],
    bs_positions: dict[int, np.ndarray],
    ue_positions: dict[tuple[int, int, int], np.ndarray],
    params: DbscanParams,
) -> LandmarkMap:
    """Run all three fusion phases on a pooled set of interaction points."""
    if not pool:
        return LandmarkMap([], np.array([], dtype=int), [], [], [])
    points = np.array([ip.position for ip in pool])
    clusters, outliers = cluster_ips(points, params)
    hulls = [convex_hull(points[c.indices], c.label) for c in clusters]
    return prune_occluded(pool, clusters, hulls, bs_positions, ue_positions, params, outliers)
