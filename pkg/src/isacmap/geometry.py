"""Small 3-D geometry helpers shared by the scene, positioning, and mapping code."""

from __future__ import annotations

import numpy as np

SPEED_OF_LIGHT_M_S = 299_792_458.0


class ConfigurationError(ValueError):
    """Raised when a scenario or estimator configuration is inconsistent."""


def unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def rotation_local_to_global(orientation) -> np.ndarray:
    """Rotation matrix mapping body-frame vectors to the global frame.

    ``orientation`` is (roll, pitch, yaw) in radians; the composition is
    Rz(yaw) @ Ry(pitch) @ Rx(roll), so a body-frame vector v maps to
    Rz Ry Rx v in the global frame.
    """
    roll, pitch, yaw = orientation
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


def rotation_global_to_local(orientation) -> np.ndarray:
    """Rotation matrix mapping global-frame vectors into the body frame."""
    return rotation_local_to_global(orientation).T


def direction_to_aoa(direction: np.ndarray, orientation) -> tuple[float, float]:
    """Azimuth/elevation (radians) of a global-frame direction seen from a body.

    The body boresight is its local +x axis; azimuth is measured in the local
    x-y plane, elevation from it.  Inverse of :func:`aoa_to_direction`.
    """
    local = rotation_global_to_local(orientation) @ unit(np.asarray(direction, dtype=float))
    el = float(np.arcsin(np.clip(local[2], -1.0, 1.0)))
    az = float(np.arctan2(local[1], local[0]))
    return az, el


def aoa_to_direction(aoa_az: float, aoa_el: float, orientation) -> np.ndarray:
    """Global-frame unit vector for a body-frame azimuth/elevation pair."""
    local = np.array(
        [
            np.cos(aoa_az) * np.cos(aoa_el),
            np.sin(aoa_az) * np.cos(aoa_el),
            np.sin(aoa_el),
        ]
    )
    return rotation_local_to_global(orientation) @ local


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    wrapped = np.mod(-np.asarray(a) + np.pi, 2.0 * np.pi)
    return np.pi - wrapped
