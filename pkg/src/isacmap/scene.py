"""Synthetic urban scene and ground-truth multipath oracle.

The scene is a set of fixed base stations, piecewise-linear user trajectories,
and axis-aligned box buildings decomposed into vertical rectangular facades.
Ground-truth propagation paths (line of sight plus specular single and double
bounces off facades) are generated with the image method: the user antenna is
mirrored across facade planes and the straight line from the image to the base
station is intersected with the facades, with every resulting segment checked
for obstruction against all other facades.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import SPEED_OF_LIGHT_M_S, ConfigurationError, direction_to_aoa

# Obstruction tests ignore crossings closer than this to a segment endpoint so
# that a leg never "blocks itself" at the facade it reflects on.
_ENDPOINT_CLEARANCE_M = 1e-6
# A reflecting surface only acts on points strictly in front of it.
_FRONT_MARGIN_M = 1e-9


@dataclass(frozen=True)
class BsState:
    """Fixed base station: URA center position and mounting orientation."""

    position: np.ndarray
    orientation: np.ndarray  # (roll, pitch, yaw), radians, each in (-pi, pi]
    coverage_radius: float
    id: int

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float))
        if self.coverage_radius <= 0:
            raise ConfigurationError(f"BS {self.id}: coverage_radius must be > 0")
        if np.any(self.orientation <= -np.pi) or np.any(self.orientation > np.pi):
            raise ConfigurationError(f"BS {self.id}: orientation angles must lie in (-pi, pi]")


@dataclass(frozen=True)
class UeState:
    """Single-antenna user at one time step; height is fixed and known."""

    position: np.ndarray
    id: int
    time_step: int

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class Facade:
    """Vertical rectangle: corner point plus two orthogonal edge vectors.

    ``edge_u`` runs horizontally, ``edge_v`` vertically; ``normal`` is the unit
    outward normal of the building face.
    """

    corner: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    normal: np.ndarray
    label: str = ""

    def __post_init__(self):
        for name in ("corner", "edge_u", "edge_v", "normal"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if abs(float(self.edge_u @ self.edge_v)) > 1e-9 * np.linalg.norm(self.edge_u) * np.linalg.norm(self.edge_v):
            raise ConfigurationError(f"facade {self.label}: edge vectors not orthogonal")
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-12:
            raise ConfigurationError(f"facade {self.label}: normal must be unit length")
        if abs(float(self.normal @ self.edge_u)) > 1e-9 or abs(float(self.normal @ self.edge_v)) > 1e-9:
            raise ConfigurationError(f"facade {self.label}: normal not orthogonal to edges")

    @property
    def plane_offset(self) -> float:
        return float(self.normal @ self.corner)

    @property
    def area(self) -> float:
        return float(np.linalg.norm(self.edge_u) * np.linalg.norm(self.edge_v))

    def height_of(self, point) -> float:
        """Signed distance of a point from the facade plane (positive in front)."""
        return float(self.normal @ np.asarray(point, dtype=float) - self.plane_offset)

    def mirror(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        return p - 2.0 * self.height_of(p) * self.normal

    def contains_plane_point(self, point, tol: float = 1e-9) -> bool:
        """Whether a point already on the plane lies inside the rectangle."""
        rel = np.asarray(point, dtype=float) - self.corner
        lu = float(np.linalg.norm(self.edge_u))
        lv = float(np.linalg.norm(self.edge_v))
        su = float(rel @ self.edge_u) / lu
        sv = float(rel @ self.edge_v) / lv
        return -tol <= su <= lu + tol and -tol <= sv <= lv + tol

    def intersect_segment(self, a, b) -> float | None:
        """Parameter t in [0, 1] where segment a->b crosses the rectangle, else None."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        denom = float(self.normal @ (b - a))
        if denom == 0.0:
            return None
        t = (self.plane_offset - float(self.normal @ a)) / denom
        if t < 0.0 or t > 1.0:
            return None
        if not self.contains_plane_point(a + t * (b - a)):
            return None
        return t

    def distance_to_point(self, point) -> float:
        """Euclidean distance from a point to the closed rectangle."""
        p = np.asarray(point, dtype=float)
        rel = p - self.corner
        lu = float(np.linalg.norm(self.edge_u))
        lv = float(np.linalg.norm(self.edge_v))
        su = np.clip(float(rel @ self.edge_u) / lu, 0.0, lu)
        sv = np.clip(float(rel @ self.edge_v) / lv, 0.0, lv)
        closest = self.corner + (su / lu) * self.edge_u + (sv / lv) * self.edge_v
        return float(np.linalg.norm(p - closest))


@dataclass(frozen=True)
class TruePath:
    """Ground-truth propagation path between one BS-UE pair.

    ``delay_range`` is the propagation distance in meters (c times the TOA);
    AOAs are in the BS body frame.  ``true_ips`` lists the bounce points in
    propagation order (UE side first) and is empty for line of sight.
    """

    gain: complex
    delay_range: float
    aoa_az: float
    aoa_el: float
    bounce_order: int
    true_ips: tuple = ()


@dataclass(frozen=True)
class Building:
    center: np.ndarray
    size: np.ndarray  # extents along x, y, z

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "size", np.asarray(self.size, dtype=float))
        if np.any(self.size <= 0):
            raise ConfigurationError("building size components must be > 0")

    @property
    def lo(self) -> np.ndarray:
        return self.center - 0.5 * self.size

    @property
    def hi(self) -> np.ndarray:
        return self.center + 0.5 * self.size

    def contains(self, point, margin: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p > self.lo - margin) and np.all(p < self.hi + margin))


@dataclass
class Scene:
    """Immutable world description; built once via :func:`build_scene`."""

    bs_states: list[BsState]
    buildings: list[Building]
    facades: list[Facade]
    ue_waypoints: dict[int, np.ndarray]  # ue id -> (n, 2) horizontal waypoints
    ue_height: float
    sample_interval: float
    max_bounce: int
    max_paths: int
    wavelength: float
    reflection_coeff: float


def _box_facades(building: Building, index: int) -> list[Facade]:
    """Four vertical facades of an axis-aligned box (roof and floor omitted)."""
    lo, hi = building.lo, building.hi
    dz = np.array([0.0, 0.0, hi[2] - lo[2]])
    ex = np.array([hi[0] - lo[0], 0.0, 0.0])
    ey = np.array([0.0, hi[1] - lo[1], 0.0])
    base = f"b{index}"
    return [
        Facade(np.array([lo[0], lo[1], lo[2]]), ey, dz, np.array([-1.0, 0.0, 0.0]), f"{base}:west"),
        Facade(np.array([hi[0], lo[1], lo[2]]), ey, dz, np.array([1.0, 0.0, 0.0]), f"{base}:east"),
        Facade(np.array([lo[0], lo[1], lo[2]]), ex, dz, np.array([0.0, -1.0, 0.0]), f"{base}:south"),
        Facade(np.array([lo[0], hi[1], lo[2]]), ex, dz, np.array([0.0, 1.0, 0.0]), f"{base}:north"),
    ]


def _boxes_overlap(a: Building, b: Building) -> bool:
    return bool(np.all(a.lo < b.hi) and np.all(b.lo < a.hi))


def build_scene(config: dict) -> Scene:
    """Construct a validated Scene from a scenario description.

    See :mod:`isacmap.presets` for the configuration schema and the shipped
    default scenarios.
    """
    bs_states = []
    for entry in config["bs"]:
        orientation = entry.get("orientation_rad")
        if orientation is None:
            orientation = np.deg2rad(entry.get("orientation_deg", (0.0, 0.0, 0.0)))
        bs_states.append(
            BsState(
                position=np.asarray(entry["position"], dtype=float),
                orientation=np.asarray(orientation, dtype=float),
                coverage_radius=float(config.get("coverage_radius_m", 70.0)),
                id=int(entry["id"]),
            )
        )
    if len({b.id for b in bs_states}) != len(bs_states):
        raise ConfigurationError("duplicate BS ids")

    buildings = [Building(np.asarray(b["center"], dtype=float), np.asarray(b["size"], dtype=float)) for b in config.get("buildings", [])]
    for i in range(len(buildings)):
        for j in range(i + 1, len(buildings)):
            if _boxes_overlap(buildings[i], buildings[j]):
                raise ConfigurationError(f"buildings {i} and {j} overlap")
    for bs in bs_states:
        for i, bld in enumerate(buildings):
            if bld.contains(bs.position):
                raise ConfigurationError(f"BS {bs.id} lies inside building {i}")

    facades = []
    for i, bld in enumerate(buildings):
        facades.extend(_box_facades(bld, i))

    waypoints: dict[int, np.ndarray] = {}
    for entry in config["ue"]:
        pts = np.asarray(entry["waypoints"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise ConfigurationError(f"UE {entry['id']}: waypoints must be an (n, 2) array")
        waypoints[int(entry["id"])] = pts

    interval = float(config.get("sample_interval_m", 5.0))
    if interval <= 0:
        raise ConfigurationError("sample_interval_m must be > 0")

    carrier = float(config.get("carrier_freq_hz", 27.2e9))
    return Scene(
        bs_states=bs_states,
        buildings=buildings,
        facades=facades,
        ue_waypoints=waypoints,
        ue_height=float(config.get("ue_height_m", 1.5)),
        sample_interval=interval,
        max_bounce=int(config.get("max_bounce", 2)),
        max_paths=int(config.get("max_paths", 50)),
        wavelength=SPEED_OF_LIGHT_M_S / carrier,
        reflection_coeff=float(config.get("reflection_coeff", 0.5)),
    )


def sample_trajectories(scene: Scene, interval: float | None = None) -> dict[int, list[UeState]]:
    """Sample every UE trajectory at arc-length-uniform spacing.

    Samples sit at distances 0, interval, 2*interval, ... along the piecewise
    linear waypoint chain; the trajectory end point is only included when the
    total length is an exact multiple of the interval.
    """
    interval = scene.sample_interval if interval is None else float(interval)
    if interval <= 0:
        raise ConfigurationError("sampling interval must be > 0")
    out: dict[int, list[UeState]] = {}
    for ue_id, pts in scene.ue_waypoints.items():
        if pts.shape[0] == 1:
            pos = np.array([pts[0, 0], pts[0, 1], scene.ue_height])
            out[ue_id] = [UeState(pos, ue_id, 0)]
            continue
        seg_len = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        total = float(cum[-1])
        n_samples = int(np.floor(total / interval + 1e-9)) + 1
        states = []
        for k in range(n_samples):
            s = min(k * interval, total)
            seg = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg_len) - 1)
            frac = (s - cum[seg]) / seg_len[seg] if seg_len[seg] > 0 else 0.0
            xy = pts[seg] + frac * (pts[seg + 1] - pts[seg])
            states.append(UeState(np.array([xy[0], xy[1], scene.ue_height]), ue_id, k))
        out[ue_id] = states
    return out


def _segment_blocked(scene: Scene, a: np.ndarray, b: np.ndarray, clearance: float = _ENDPOINT_CLEARANCE_M) -> bool:
    """Whether the open segment a->b crosses any facade (endpoint touches ignored)."""
    length = float(np.linalg.norm(b - a))
    if length == 0.0:
        return False
    t_eps = clearance / length
    for facade in scene.facades:
        t = facade.intersect_segment(a, b)
        if t is not None and t_eps < t < 1.0 - t_eps:
            return True
    return False


def _path_gain(scene: Scene, delay_range: float, bounce_order: int) -> float:
    return scene.wavelength / (4.0 * np.pi * delay_range) * scene.reflection_coeff**bounce_order


def _make_path(scene: Scene, bs: BsState, ue_pos: np.ndarray, ips: list[np.ndarray], rng) -> TruePath:
    points = [ue_pos, *ips, bs.position]
    delay = float(sum(np.linalg.norm(points[i + 1] - points[i]) for i in range(len(points) - 1)))
    arrival_from = points[-2]  # last interaction point, or the UE for LoS
    az, el = direction_to_aoa(arrival_from - bs.position, bs.orientation)
    magnitude = _path_gain(scene, delay, len(ips))
    phase = float(rng.uniform(0.0, 2.0 * np.pi)) if rng is not None else 0.0
    return TruePath(
        gain=magnitude * np.exp(1j * phase),
        delay_range=delay,
        aoa_az=az,
        aoa_el=el,
        bounce_order=len(ips),
        true_ips=tuple(np.array(p) for p in ips),
    )


def trace_paths(
    scene: Scene,
    bs: BsState,
    ue: UeState,
    max_bounce: int | None = None,
    rng: np.random.Generator | None = None,
) -> list[TruePath]:
    """Ground-truth paths for one BS-UE snapshot, strongest first.

    Returns the unobstructed LoS path plus every geometrically valid specular
    single- and (for max_bounce == 2) double-bounce path off the vertical
    facades, truncated to the scene's ``max_paths`` strongest by gain
    magnitude.  An empty list means the UE is outside the BS coverage radius.
    Gain phases are drawn from ``rng`` when given (one draw per candidate
    path, in deterministic facade order) and are zero otherwise.
    """
    max_bounce = scene.max_bounce if max_bounce is None else int(max_bounce)
    if max_bounce not in (0, 1, 2):
        raise ConfigurationError("max_bounce must be 0, 1, or 2")
    ue_pos = ue.position
    if np.linalg.norm(ue_pos - bs.position) > bs.coverage_radius:
        return []

    paths: list[TruePath] = []
    if not _segment_blocked(scene, ue_pos, bs.position):
        paths.append(_make_path(scene, bs, ue_pos, [], rng))

    if max_bounce >= 1:
        for facade in scene.facades:
            ip = _single_bounce_ip(scene, facade, bs.position, ue_pos)
            if ip is not None:
                paths.append(_make_path(scene, bs, ue_pos, [ip], rng))

    if max_bounce >= 2:
        for first in scene.facades:
            if first.height_of(ue_pos) <= _FRONT_MARGIN_M:
                continue
            image1 = first.mirror(ue_pos)
            for second in scene.facades:
                if second is first:
                    continue
                ips = _double_bounce_ips(scene, first, second, bs.position, ue_pos, image1)
                if ips is not None:
                    paths.append(_make_path(scene, bs, ue_pos, ips, rng))

    paths.sort(key=lambda p: -abs(p.gain))
    return paths[: scene.max_paths]


def _single_bounce_ip(scene: Scene, facade: Facade, bs_pos: np.ndarray, ue_pos: np.ndarray) -> np.ndarray | None:
    if facade.height_of(ue_pos) <= _FRONT_MARGIN_M or facade.height_of(bs_pos) <= _FRONT_MARGIN_M:
        return None
    image = facade.mirror(ue_pos)
    t = facade.intersect_segment(bs_pos, image)
    if t is None:
        return None
    ip = bs_pos + t * (image - bs_pos)
    if _segment_blocked(scene, ue_pos, ip) or _segment_blocked(scene, ip, bs_pos):
        return None
    return ip


def _double_bounce_ips(
    scene: Scene,
    first: Facade,
    second: Facade,
    bs_pos: np.ndarray,
    ue_pos: np.ndarray,
    image1: np.ndarray,
) -> list[np.ndarray] | None:
    if second.height_of(bs_pos) <= _FRONT_MARGIN_M:
        return None
    image2 = second.mirror(image1)
    t2 = second.intersect_segment(bs_pos, image2)
    if t2 is None:
        return None
    ip2 = bs_pos + t2 * (image2 - bs_pos)
    t1 = first.intersect_segment(ip2, image1)
    if t1 is None:
        return None
    ip1 = ip2 + t1 * (image1 - ip2)
    # Both bounce points must see their partner surface from the front.
    if first.height_of(ip2) <= _FRONT_MARGIN_M or second.height_of(ip1) <= _FRONT_MARGIN_M:
        return None
    if (
        _segment_blocked(scene, ue_pos, ip1)
        or _segment_blocked(scene, ip1, ip2)
        or _segment_blocked(scene, ip2, bs_pos)
    ):
        return None
    return [ip1, ip2]
