"""OFDM observation-tensor synthesis at a base-station URA.

A snapshot is the complex tensor Y[iz, ix, kappa] of size N_z x N_x x S
(vertical antenna, horizontal antenna, subcarrier) obtained after pilot
removal: the sum over paths of rank-1 outer products of the vertical,
horizontal, and frequency steering vectors, scaled by per-path gains, plus
circularly symmetric complex Gaussian noise.

Array convention: the URA lies in the local y-z plane with boresight along
local +x; the "horizontal" element index advances along local y, so the
horizontal phase progression is proportional to cos(el) * sin(az) and the
vertical one to sin(el).  Delays are carried as propagation distances in
meters throughout the library and converted to seconds only here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SPEED_OF_LIGHT_M_S
from .scene import TruePath


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform rectangular array geometry."""

    n_x: int = 8
    n_z: int = 8
    d_x: float | None = None  # element spacing, meters; defaults to lambda/2
    d_z: float | None = None
    wavelength: float = SPEED_OF_LIGHT_M_S / 27.2e9

    def __post_init__(self):
        if self.n_x < 2 or self.n_z < 2:
            raise ValueError("URA needs at least 2 elements per axis")
        if self.d_x is None:
            object.__setattr__(self, "d_x", 0.5 * self.wavelength)
        if self.d_z is None:
            object.__setattr__(self, "d_z", 0.5 * self.wavelength)
        if self.d_x <= 0 or self.d_z <= 0 or self.wavelength <= 0:
            raise ValueError("spacings and wavelength must be > 0")


@dataclass(frozen=True)
class WaveformConfig:
    """OFDM pilot waveform and receiver noise parameters."""

    carrier_freq: float = 27.2e9
    subcarrier_spacing: float = 120e3
    num_subcarriers: int = 128
    num_symbols: int = 12
    tx_power_dbm: float = 10.0
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 8.0

    def __post_init__(self):
        if self.num_subcarriers < 2:
            raise ValueError("need at least 2 subcarriers")
        if self.subcarrier_spacing <= 0:
            raise ValueError("subcarrier spacing must be > 0")

    @property
    def bandwidth(self) -> float:
        return self.num_subcarriers * self.subcarrier_spacing

    @property
    def noise_variance_mw(self) -> float:
        """Complex noise variance per tensor entry, in mW.

        Thermal noise PSD plus receiver noise figure integrated over one
        subcarrier; symbol integration is carried on the signal side.
        """
        return 10.0 ** ((self.noise_psd_dbm_hz + self.noise_figure_db) / 10.0) * self.subcarrier_spacing

    @property
    def tx_power_mw(self) -> float:
        return 10.0 ** (self.tx_power_dbm / 10.0)


def steering_vector(aoa_az: float, aoa_el: float, axis: str, array: ArrayConfig) -> np.ndarray:
    """Unit-modulus spatial steering vector along one URA axis.

    ``axis`` is "horizontal" (length n_x, phase ~ cos(el) sin(az)) or
    "vertical" (length n_z, phase ~ sin(el)); element index starts at 0.
    """
    if axis == "horizontal":
        n = np.arange(array.n_x)
        phase = 2.0 * np.pi / array.wavelength * array.d_x * np.cos(aoa_el) * np.sin(aoa_az)
    elif axis == "vertical":
        n = np.arange(array.n_z)
        phase = 2.0 * np.pi / array.wavelength * array.d_z * np.sin(aoa_el)
    else:
        raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")
    return np.exp(1j * phase * n)


def delay_steering(delay_range: float, waveform: WaveformConfig) -> np.ndarray:
    """Frequency-domain steering vector for a propagation distance in meters."""
    tau = delay_range / SPEED_OF_LIGHT_M_S
    kappa = np.arange(waveform.num_subcarriers)
    return np.exp(-2j * np.pi * kappa * waveform.subcarrier_spacing * tau)


def path_amplitude(path: TruePath, waveform: WaveformConfig) -> complex:
    """Per-entry complex amplitude of a path in the observation tensor.

    The geometric channel gain is scaled by the per-subcarrier transmit
    amplitude and by sqrt(num_symbols) for coherent pilot integration.
    """
    per_subcarrier = np.sqrt(waveform.tx_power_mw / waveform.num_subcarriers)
    return complex(path.gain * per_subcarrier * np.sqrt(waveform.num_symbols))


def synthesize_snapshot(
    paths: list[TruePath],
    array: ArrayConfig,
    waveform: WaveformConfig,
    seed=None,
    noise_variance: float | None = None,
) -> np.ndarray:
    """Observation tensor of shape (n_z, n_x, S) for one BS-UE snapshot.

    ``seed`` may be an int, a seed sequence, or an ``np.random.Generator``;
    ``None`` disables noise.  ``noise_variance`` (mW per complex entry)
    overrides the waveform-derived default, which is useful for controlled
    SNR experiments.
    """
    if not paths:
        raise ValueError("synthesize_snapshot requires a nonempty path list")
    shape = (array.n_z, array.n_x, waveform.num_subcarriers)
    tensor = np.zeros(shape, dtype=complex)
    for path in paths:
        amp = path_amplitude(path, waveform)
        a_z = steering_vector(path.aoa_az, path.aoa_el, "vertical", array)
        a_x = steering_vector(path.aoa_az, path.aoa_el, "horizontal", array)
        d = delay_steering(path.delay_range, waveform)
        tensor += amp * (a_z[:, None, None] * a_x[None, :, None] * d[None, None, :])
    if seed is not None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        sigma2 = waveform.noise_variance_mw if noise_variance is None else float(noise_variance)
        scale = np.sqrt(sigma2 / 2.0)
        tensor += scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return tensor
