import numpy as np
import pytest

from isacmap import presets
from isacmap.scene import build_scene, sample_trajectories
from isacmap.signal import ArrayConfig, WaveformConfig


@pytest.fixture(scope="session")
def desk_config():
    return presets.scenario_config("desk")


@pytest.fixture(scope="session")
def desk_scene(desk_config):
    return build_scene(desk_config)


@pytest.fixture(scope="session")
def desk_trajectories(desk_scene):
    return sample_trajectories(desk_scene)


@pytest.fixture(scope="session")
def desk_array(desk_config):
    return presets.array_config(desk_config)


@pytest.fixture(scope="session")
def desk_waveform(desk_config):
    return presets.waveform_config(desk_config)


@pytest.fixture(scope="session")
def paper_scene():
    return build_scene(presets.scenario_config("paper"))


@pytest.fixture
def small_array():
    return ArrayConfig(n_x=8, n_z=8, wavelength=0.011)


@pytest.fixture
def small_waveform():
    return WaveformConfig(num_subcarriers=128, subcarrier_spacing=120e3, num_symbols=12)


def assert_unit(v, tol=1e-12):
    assert abs(np.linalg.norm(v) - 1.0) <= tol
