"""Shipped scenario presets and YAML scenario loading.

The "desk" preset is the default: 2 BSs, 1 UE with 10 trajectory samples,
and 128 subcarriers, sized so the full estimation pipeline runs in well
under two minutes.  The "paper" preset reproduces the T-junction urban
scenario (4 BSs, 3 UEs, 400 MHz of bandwidth); it is much slower in full
mode and meant for oracle-mode or long-running experiments.

Scenario YAML schema (all lengths in meters, angles in degrees)::

    name: desk
    carrier_freq_hz: 27.2e9
    ue_height_m: 1.5
    coverage_radius_m: 70.0
    sample_interval_m: 5.0
    max_bounce: 2
    max_paths: 50
    reflection_coeff: 0.5
    bs:
      - {id: 0, position: [x, y, z], orientation_deg: [roll, pitch, yaw]}
    buildings:
      - {center: [x, y, z], size: [lx, ly, lz]}
    ue:
      - {id: 0, waypoints: [[x0, y0], [x1, y1], ...]}
    array: {n_x: 8, n_z: 8}
    waveform: {subcarrier_spacing_hz: 120.0e3, num_subcarriers: 128,
               num_symbols: 12, tx_power_dbm: 10.0,
               noise_psd_dbm_hz: -174.0, noise_figure_db: 8.0}
"""

from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .geometry import SPEED_OF_LIGHT_M_S, ConfigurationError
from .signal import ArrayConfig, WaveformConfig

# Three BSs at staggered heights line the west side of a straight street
# segment; the height stagger spreads reflection points vertically so IP
# clusters are genuinely 3-D under the paper's DBSCAN parameters.
DESK_SCENARIO: dict = {
    "name": "desk",
    "carrier_freq_hz": 27.2e9,
    "ue_height_m": 1.5,
    "coverage_radius_m": 70.0,
    "sample_interval_m": 2.0,
    "max_bounce": 2,
    "max_paths": 50,
    "reflection_coeff": 0.5,
    "bs": [
        {"id": 0, "position": [-15.0, -60.0, 8.0], "orientation_deg": [0.0, 0.0, 45.0]},
        {"id": 1, "position": [-15.0, 5.0, 18.0], "orientation_deg": [0.0, 0.0, -50.0]},
        {"id": 2, "position": [-15.0, -27.5, 15.0], "orientation_deg": [0.0, 0.0, 0.0]},
    ],
    "buildings": [
        {"center": [40.0, 0.0, 15.0], "size": [50.0, 140.0, 30.0]},
        {"center": [-40.0, -27.5, 15.0], "size": [30.0, 55.0, 30.0]},
    ],
    "ue": [
        {"id": 0, "waypoints": [[2.0, -50.0], [2.0, -32.0]]},
    ],
    "array": {"n_x": 8, "n_z": 8},
    "waveform": {
        "subcarrier_spacing_hz": 120.0e3,
        "num_subcarriers": 128,
        "num_symbols": 12,
        "tx_power_dbm": 10.0,
        "noise_psd_dbm_hz": -174.0,
        "noise_figure_db": 8.0,
    },
}

# T-junction urban scenario: building A lines the east side of the
# north-south road, buildings B and C flank the east-west road.  Caution:
# full (non-oracle) runs decompose ~3300-subcarrier tensors per snapshot
# and take hours; use oracle mode or the desk preset for quick runs.
PAPER_SCENARIO: dict = {
    "name": "paper",
    "carrier_freq_hz": 27.2e9,
    "ue_height_m": 1.5,
    "coverage_radius_m": 70.0,
    "sample_interval_m": 5.0,
    "max_bounce": 2,
    "max_paths": 50,
    "reflection_coeff": 0.5,
    "bs": [
        {"id": 0, "position": [0.0, 0.0, 15.0], "orientation_deg": [0.0, 0.0, 180.0]},
        {"id": 1, "position": [0.0, -70.0, 15.0], "orientation_deg": [0.0, 0.0, 90.0]},
        {"id": 2, "position": [0.0, 70.0, 15.0], "orientation_deg": [0.0, 0.0, -90.0]},
        {"id": 3, "position": [-70.0, 0.0, 15.0], "orientation_deg": [0.0, 0.0, 0.0]},
    ],
    "buildings": [
        {"center": [40.0, 0.0, 15.0], "size": [50.0, 140.0, 30.0]},
        {"center": [-40.0, 40.0, 15.0], "size": [60.0, 60.0, 30.0]},
        {"center": [-40.0, -40.0, 15.0], "size": [60.0, 60.0, 30.0]},
    ],
    "ue": [
        {"id": 0, "waypoints": [[2.0, -70.0], [2.0, 70.0]]},
        {"id": 1, "waypoints": [[-70.0, -2.0], [-2.0, -2.0], [-2.0, -70.0]]},
        {"id": 2, "waypoints": [[-2.0, 70.0], [-2.0, 2.0], [-70.0, 2.0]]},
    ],
    "array": {"n_x": 8, "n_z": 8},
    "waveform": {
        "subcarrier_spacing_hz": 120.0e3,
        "num_subcarriers": 3333,  # ~400 MHz active bandwidth
        "num_symbols": 12,
        "tx_power_dbm": 10.0,
        "noise_psd_dbm_hz": -174.0,
        "noise_figure_db": 8.0,
    },
}

_PRESETS = {"desk": DESK_SCENARIO, "paper": PAPER_SCENARIO}


def scenario_config(name_or_path: str | Path = "desk") -> dict:
    """Resolve a preset name or a YAML scenario file into a config dict."""
    key = str(name_or_path)
    if key in _PRESETS:
        return copy.deepcopy(_PRESETS[key])
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigurationError(f"unknown scenario preset or missing file: {name_or_path}")
    with open(path) as fh:
        config = yaml.safe_load(fh)
    if not isinstance(config, dict):
        raise ConfigurationError(f"scenario file {path} must contain a mapping")
    return config


def array_config(config: dict) -> ArrayConfig:
    section = config.get("array", {})
    wavelength = SPEED_OF_LIGHT_M_S / float(config.get("carrier_freq_hz", 27.2e9))
    return ArrayConfig(
        n_x=int(section.get("n_x", 8)),
        n_z=int(section.get("n_z", 8)),
        d_x=section.get("d_x_m"),
        d_z=section.get("d_z_m"),
        wavelength=wavelength,
    )


def waveform_config(config: dict) -> WaveformConfig:
    section = config.get("waveform", {})
    return WaveformConfig(
        carrier_freq=float(config.get("carrier_freq_hz", 27.2e9)),
        subcarrier_spacing=float(section.get("subcarrier_spacing_hz", 120e3)),
        num_subcarriers=int(section.get("num_subcarriers", 128)),
        num_symbols=int(section.get("num_symbols", 12)),
        tx_power_dbm=float(section.get("tx_power_dbm", 10.0)),
        noise_psd_dbm_hz=float(section.get("noise_psd_dbm_hz", -174.0)),
        noise_figure_db=float(section.get("noise_figure_db", 8.0)),
    )
