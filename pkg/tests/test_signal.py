import numpy as np
import pytest

from isacmap.scene import TruePath
from isacmap.signal import (
    ArrayConfig,
    WaveformConfig,
    delay_steering,
    path_amplitude,
    steering_vector,
    synthesize_snapshot,
)

C = 299_792_458.0


def _path(gain, delay, az, el, order=0):
    return TruePath(gain=gain, delay_range=delay, aoa_az=az, aoa_el=el, bounce_order=order)


class TestSteeringVector:
    def test_broadside_horizontal_all_ones(self, small_array):
        v = steering_vector(0.0, 0.0, "horizontal", small_array)
        assert v.shape == (small_array.n_x,)
        assert np.allclose(v, 1.0)

    def test_vertical_ignores_azimuth_at_zero_elevation(self, small_array):
        for az in (0.0, 0.7, -1.2):
            assert np.allclose(steering_vector(az, 0.0, "vertical", small_array), 1.0)

    def test_endfire_element_phase(self):
        # direct scalar evaluation: n=1, d=lambda/2, az=pi/2, el=0 -> e^{j pi}
        array = ArrayConfig(n_x=4, n_z=4, wavelength=2.0)  # d = 1.0
        v = steering_vector(np.pi / 2, 0.0, "horizontal", array)
        exponent = 2 * np.pi / 2.0 * 1.0 * np.cos(0.0) * np.sin(np.pi / 2) * 1
        assert v[1] == pytest.approx(np.exp(1j * exponent))
        assert v[1] == pytest.approx(-1.0)

    def test_unit_modulus(self, small_array):
        rng = np.random.default_rng(0)
        for _ in range(20):
            az, el = rng.uniform(-1.5, 1.5), rng.uniform(-1.4, 1.4)
            for axis in ("horizontal", "vertical"):
                assert np.allclose(np.abs(steering_vector(az, el, axis, small_array)), 1.0)

    def test_bad_axis_rejected(self, small_array):
        with pytest.raises(ValueError, match="axis"):
            steering_vector(0.0, 0.0, "diagonal", small_array)


class TestDelaySteering:
    def test_zero_delay_all_ones(self, small_waveform):
        assert np.allclose(delay_steering(0.0, small_waveform), 1.0)

    def test_half_band_delay_phase(self):
        wf = WaveformConfig(num_subcarriers=128, subcarrier_spacing=120e3)
        tau = 1.0 / (wf.num_subcarriers * wf.subcarrier_spacing)
        v = delay_steering(tau * C, wf)
        kappa = wf.num_subcarriers // 2
        # direct exponent evaluation: phase = -2 pi (S/2) df tau = -pi,
        # i.e. the entry equals e^{-j pi} = -1 (principal angle magnitude pi)
        assert abs(np.angle(v[kappa])) == pytest.approx(np.pi)
        assert v[kappa] == pytest.approx(-1.0)

    def test_conjugate_symmetry(self, small_waveform):
        r = 137.0
        assert np.allclose(np.conj(delay_steering(r, small_waveform)), delay_steering(-r, small_waveform))


class TestSynthesizeSnapshot:
    def test_single_path_rank1_in_all_modes(self, small_array, small_waveform):
        tensor = synthesize_snapshot([_path(1.0, 100.0, 0.4, -0.2)], small_array, small_waveform)
        for mode in range(3):
            m = np.moveaxis(tensor, mode, 0).reshape(tensor.shape[mode], -1)
            s = np.linalg.svd(m, compute_uv=False)
            assert s[1] < 1e-9 * s[0]

    def test_two_orthogonal_delays_mode3_rank2(self, small_array, small_waveform):
        bin_m = C / (small_waveform.num_subcarriers * small_waveform.subcarrier_spacing)
        paths = [_path(1.0, 0.0, 0.3, 0.1), _path(1.0, bin_m, -0.5, -0.2)]
        tensor = synthesize_snapshot(paths, small_array, small_waveform)
        m = np.moveaxis(tensor, 2, 0).reshape(tensor.shape[2], -1)
        s = np.linalg.svd(m, compute_uv=False)
        assert s[1] > 1e-3 * s[0]
        assert s[2] < 1e-9 * s[0]

    def test_paper_noise_variance_regression(self):
        # -174 dBm/Hz PSD + 8 dB NF over one 120 kHz subcarrier, in mW
        wf = WaveformConfig(
            carrier_freq=27.2e9,
            subcarrier_spacing=120e3,
            num_subcarriers=3333,
            num_symbols=12,
            tx_power_dbm=10.0,
            noise_psd_dbm_hz=-174.0,
            noise_figure_db=8.0,
        )
        assert wf.noise_variance_mw == pytest.approx(3.0142637178114863e-12, rel=1e-12)
        assert wf.tx_power_mw == pytest.approx(10.0)

    def test_symbol_integration_scales_amplitude(self, small_array):
        wf1 = WaveformConfig(num_subcarriers=64, num_symbols=1)
        wf12 = WaveformConfig(num_subcarriers=64, num_symbols=12)
        p = _path(1e-5, 50.0, 0.1, 0.0)
        assert abs(path_amplitude(p, wf12)) == pytest.approx(np.sqrt(12) * abs(path_amplitude(p, wf1)))

    def test_noiseless_energy_of_orthogonal_paths(self, small_array, small_waveform):
        bin_m = C / (small_waveform.num_subcarriers * small_waveform.subcarrier_spacing)
        paths = [_path(2.0, 0.0, 0.0, 0.0), _path(1.0, 4 * bin_m, 0.0, 0.0)]
        tensor = synthesize_snapshot(paths, small_array, small_waveform)
        n_entries = small_array.n_x * small_array.n_z * small_waveform.num_subcarriers
        amps = [abs(path_amplitude(p, small_waveform)) for p in paths]
        expected = sum(a**2 for a in amps) * n_entries
        assert np.sum(np.abs(tensor) ** 2) == pytest.approx(expected, rel=1e-9)

    def test_energy_upper_bound(self, small_array, small_waveform):
        rng = np.random.default_rng(3)
        paths = [
            _path(rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(0, 2 * np.pi)), rng.uniform(0, 500), rng.uniform(-1, 1), rng.uniform(-1, 1))
            for _ in range(4)
        ]
        tensor = synthesize_snapshot(paths, small_array, small_waveform)
        n_entries = small_array.n_x * small_array.n_z * small_waveform.num_subcarriers
        bound = sum(abs(path_amplitude(p, small_waveform)) for p in paths) ** 2 * n_entries
        assert np.sum(np.abs(tensor) ** 2) <= bound * (1 + 1e-12)

    def test_linearity(self, small_array, small_waveform):
        a = [_path(1.0, 10.0, 0.2, 0.0)]
        b = [_path(0.5j, 90.0, -0.4, 0.3)]
        t_ab = synthesize_snapshot(a + b, small_array, small_waveform)
        t_a = synthesize_snapshot(a, small_array, small_waveform)
        t_b = synthesize_snapshot(b, small_array, small_waveform)
        assert np.allclose(t_ab, t_a + t_b, atol=1e-15)

    def test_seed_reproducibility(self, small_array, small_waveform):
        paths = [_path(1e-5, 60.0, 0.2, -0.1)]
        t1 = synthesize_snapshot(paths, small_array, small_waveform, seed=42)
        t2 = synthesize_snapshot(paths, small_array, small_waveform, seed=42)
        assert np.array_equal(t1, t2)
        t3 = synthesize_snapshot(paths, small_array, small_waveform, seed=43)
        assert not np.array_equal(t1, t3)

    def test_empty_path_list_rejected(self, small_array, small_waveform):
        with pytest.raises(ValueError, match="nonempty"):
            synthesize_snapshot([], small_array, small_waveform)

    def test_noise_variance_override(self, small_array, small_waveform):
        paths = [_path(0.0, 10.0, 0.0, 0.0)]
        tensor = synthesize_snapshot(paths, small_array, small_waveform, seed=0, noise_variance=4.0)
        measured = np.mean(np.abs(tensor) ** 2)
        assert measured == pytest.approx(4.0, rel=0.05)
