"""Per-snapshot UE positioning and interaction-point mapping.

Each BS processes its own estimated paths independently: the shortest path is
taken as line of sight and feeds a maximum-likelihood position fit on the
known-height plane; every remaining path is treated as a single bounce and
converted to an interaction point as the intersection of the arrival ray from
the BS with the ellipsoid whose foci are the BS and the estimated UE position
and whose focal-sum equals the measured path range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chanest import EstimatedPath
from .geometry import aoa_to_direction, rotation_global_to_local, wrap_angle
from .scene import BsState


class NoLosError(RuntimeError):
    """No usable path for positioning in this snapshot."""


class IpGeometryError(ValueError):
    """Path measurements are inconsistent with any single-bounce geometry."""

    def __init__(self, message: str, kind: str):
        super().__init__(message)
        self.kind = kind  # "infeasible" or "inconsistent"


@dataclass(frozen=True)
class LosMeasurement:
    """LoS (range, azimuth, elevation) with its measurement covariance."""

    delay_range: float
    aoa_az: float
    aoa_el: float
    covariance: np.ndarray  # 3x3, (m^2, rad^2, rad^2) on the diagonal

    def __post_init__(self):
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))
        r = self.covariance
        if r.shape != (3, 3) or not np.allclose(r, r.T):
            raise ValueError("covariance must be symmetric 3x3")
        if np.any(np.linalg.eigvalsh(r) <= 0):
            raise ValueError("covariance must be positive definite")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.delay_range, self.aoa_az, self.aoa_el])


@dataclass(frozen=True)
class UePositionEstimate:
    x: float
    y: float
    z: float
    converged: bool
    objective: float
    n_iter: int = 0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class IpEstimate:
    """Estimated interaction point with full snapshot provenance."""

    position: np.ndarray
    bs_id: int
    ue_id: int
    time_step: int
    path_index: int
    ray_parameter: float  # distance from the BS along the arrival ray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


def select_los(paths: list[EstimatedPath]) -> tuple[EstimatedPath, list[EstimatedPath]]:
    """Split paths into (shortest-delay LoS candidate, remaining NLoS paths).

    Ties at the minimum delay keep the lowest-index path; the NLoS list
    preserves input order.
    """
    if not paths:
        raise NoLosError("empty path list")
    i_los = min(range(len(paths)), key=lambda i: paths[i].delay_range)
    return paths[i_los], [p for i, p in enumerate(paths) if i != i_los]


def bearing_vector(aoa_az: float, aoa_el: float, bs_orientation) -> np.ndarray:
    """Global-frame unit vector of an arrival direction seen at the BS."""
    return aoa_to_direction(aoa_az, aoa_el, bs_orientation)


def measurement_of(ue_pos, bs: BsState) -> tuple[float, float, float]:
    """Noise-free (range, azimuth, elevation) of the LoS path to a UE."""
    d = np.asarray(ue_pos, dtype=float) - bs.position
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise ValueError("UE position coincides with the BS")
    local = rotation_global_to_local(bs.orientation) @ (d / r)
    el = float(np.arcsin(np.clip(local[2], -1.0, 1.0)))
    az = float(np.arctan2(local[1], local[0]))
    return r, az, el


def _residual_and_jacobian(xy: np.ndarray, z_meas: np.ndarray, bs: BsState, height: float, rot: np.ndarray | None = None):
    """Measurement residual (z - h) and the 3x2 Jacobian of h wrt (x, y)."""
    if rot is None:
        rot = rotation_global_to_local(bs.orientation)
    d = np.array([xy[0] - bs.position[0], xy[1] - bs.position[1], height - bs.position[2]])
    r = float(np.sqrt(d @ d))
    local = rot @ d
    lx, ly, lz = local
    rho2 = lx * lx + ly * ly
    sz = min(max(lz / r, -1.0), 1.0)
    h = np.array([r, np.arctan2(ly, lx), np.arcsin(sz)])
    residual = z_meas - h
    residual[1] = wrap_angle(residual[1])
    residual[2] = wrap_angle(residual[2])

    dl = rot[:, :2]  # d(local)/d(x, y)
    dr = d[:2] / r  # d(r)/d(x, y)
    jac = np.empty((3, 2))
    jac[0] = dr
    jac[1] = (lx * dl[1] - ly * dl[0]) / rho2
    jac[2] = (dl[2] - sz * dr) / (r * np.sqrt(max(1.0 - sz * sz, 1e-18)))
    return residual, jac


def _initial_guess(z: LosMeasurement, bs: BsState, height: float) -> np.ndarray:
    """Closed-form geometric back-projection onto the known-height plane."""
    u = bearing_vector(z.aoa_az, z.aoa_el, bs.orientation)
    horiz = np.linalg.norm(u[:2])
    dz = height - bs.position[2]
    rho2 = z.delay_range**2 - dz**2
    if rho2 <= 0.0 or horiz == 0.0:
        # measured elevation points too steeply for the range; fall back to a
        # horizontal projection along the measured azimuth
        direction = u[:2] / horiz if horiz > 0 else np.array([1.0, 0.0])
        return bs.position[:2] + z.delay_range * direction
    return bs.position[:2] + np.sqrt(rho2) * (u[:2] / horiz)


def locate_ue(
    z: LosMeasurement,
    bs: BsState,
    known_height: float,
    max_iter: int = 200,
    grad_tol: float = 1e-9,
) -> UePositionEstimate:
    """ML fit of the horizontal UE coordinates from one LoS measurement.

    Minimizes the covariance-weighted squared residual by gradient descent
    with Armijo backtracking, starting from the closed-form back-projection;
    the objective is non-increasing over iterations by construction.
    """
    r_inv = np.linalg.inv(z.covariance)
    z_vec = z.vector
    rot = rotation_global_to_local(bs.orientation)

    def objective_grad(xy: np.ndarray) -> tuple[float, np.ndarray]:
        res, jac = _residual_and_jacobian(xy, z_vec, bs, known_height, rot)
        value = float(res @ r_inv @ res)
        grad = -2.0 * jac.T @ (r_inv @ res)
        return value, grad

    xy = _initial_guess(z, bs, known_height)
    value, grad = objective_grad(xy)
    converged = False
    it = 0
    step = 1.0  # warm-started across iterations; Armijo still guards descent
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < grad_tol:
            converged = True
            break
        step = min(step * 4.0, 1.0)
        accepted = False
        for _ in range(60):
            trial = xy - step * grad
            trial_value, trial_grad = objective_grad(trial)
            if trial_value <= value - 1e-4 * step * gnorm**2:
                xy, value, grad = trial, trial_value, trial_grad
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # no descent step representable; stationary to precision
    gnorm = float(np.linalg.norm(grad))
    converged = converged or gnorm < grad_tol
    return UePositionEstimate(float(xy[0]), float(xy[1]), known_height, converged, value, it)


def estimate_ip(
    delay_range: float,
    aoa_az: float,
    aoa_el: float,
    ue_pos,
    bs: BsState,
    bs_id: int | None = None,
    ue_id: int = 0,
    time_step: int = 0,
    path_index: int = 0,
    tol: float = 1e-6,
) -> IpEstimate:
    """Closed-form single-bounce interaction point for one NLoS path.

    With u the arrival bearing, d = ue - bs, and r the path range, the point
    bs + alpha*u with alpha = (r^2 - |d|^2) / (2 (r - u.d)) satisfies both
    the ellipsoid (|ip-ue| + |ip-bs| = r) and half-line constraints; both are
    re-verified to ``tol`` before returning.
    """
    ue_pos = np.asarray(ue_pos, dtype=float)
    d = ue_pos - bs.position
    dist = float(np.linalg.norm(d))
    if delay_range <= dist:
        raise IpGeometryError(
            f"path range {delay_range:.6f} m does not exceed the BS-UE distance {dist:.6f} m",
            kind="infeasible",
        )
    u = bearing_vector(aoa_az, aoa_el, bs.orientation)
    denom = delay_range - float(u @ d)
    if denom <= 0.0:
        raise IpGeometryError("arrival ray is inconsistent with the measured range", kind="inconsistent")
    alpha = (delay_range**2 - dist**2) / (2.0 * denom)
    if alpha <= 0.0:
        raise IpGeometryError("ellipsoid intersection lies behind the BS", kind="inconsistent")
    ip = bs.position + alpha * u
    focal_sum = float(np.linalg.norm(ip - ue_pos) + np.linalg.norm(ip - bs.position))
    ray_err = abs(float((ip - bs.position) @ u) - float(np.linalg.norm(ip - bs.position)))
    if abs(focal_sum - delay_range) > tol or ray_err > tol:
        raise IpGeometryError(
            f"closed-form IP failed verification: focal sum error {focal_sum - delay_range:.3e} m",
            kind="inconsistent",
        )
    return IpEstimate(
        position=ip,
        bs_id=bs.id if bs_id is None else bs_id,
        ue_id=ue_id,
        time_step=time_step,
        path_index=path_index,
        ray_parameter=float(alpha),
    )


@dataclass(frozen=True)
class MeasurementSigmas:
    """Diagonal measurement noise model used to build LoS covariances."""

    sigma_range: float = 0.3  # meters
    sigma_az: float = np.deg2rad(0.3)
    sigma_el: float = np.deg2rad(0.3)

    def covariance(self) -> np.ndarray:
        return np.diag([self.sigma_range**2, self.sigma_az**2, self.sigma_el**2])


@dataclass
class SnapshotOutput:
    """Positioning and mapping products of one (BS, UE, time step) snapshot."""

    ue_estimate: UePositionEstimate | None
    ips: list[IpEstimate]
    discarded_paths: list[tuple[int, str]]  # (path index, reason)
    los_index: int | None = None


def process_snapshot(
    paths: list[EstimatedPath],
    bs: BsState,
    ue_id: int,
    time_step: int,
    known_height: float,
    sigmas: MeasurementSigmas | None = None,
) -> SnapshotOutput:
    """Run LoS selection, positioning, and per-path IP mapping for a snapshot.

    Paths whose geometry is infeasible under the single-bounce model are
    dropped with a reason instead of aborting the snapshot.
    """
    sigmas = sigmas or MeasurementSigmas()
    if not paths:
        return SnapshotOutput(None, [], [], None)
    los, _ = select_los(paths)
    los_index = next(i for i, p in enumerate(paths) if p is los)
    z = LosMeasurement(los.delay_range, los.aoa_az, los.aoa_el, sigmas.covariance())
    ue_est = locate_ue(z, bs, known_height)
    ips: list[IpEstimate] = []
    discarded: list[tuple[int, str]] = []
    for idx, path in enumerate(paths):
        if idx == los_index:
            continue
        try:
            ips.append(
                estimate_ip(
                    path.delay_range,
                    path.aoa_az,
                    path.aoa_el,
                    ue_est.position,
                    bs,
                    ue_id=ue_id,
                    time_step=time_step,
                    path_index=idx,
                )
            )
        except IpGeometryError as err:
            discarded.append((idx, err.kind))
    return SnapshotOutput(ue_est, ips, discarded, los_index)
