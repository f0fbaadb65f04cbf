"""Log-mel geometry, normalization, and energy bookkeeping."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from anosound.config import FeatureConfig
from anosound.corpus import Waveform
from anosound.errors import InvalidInputError
from anosound.features import (
    LogMelSpec,
    fix_length,
    logmel,
    mel_filterbank,
    mel_power,
    normalize,
)

FULL = FeatureConfig(n_mels=128, clip_seconds=10.0)
DESK = FeatureConfig(n_mels=64, clip_seconds=2.0)


def wave_of(samples, sr=16000):
    return Waveform(samples=np.asarray(samples, dtype=np.float64), sample_rate=sr)


class TestGeometry:
    def test_full_scale_silence(self):
        spec = logmel(wave_of(np.zeros(160000)), FULL)
        assert spec.values.shape == (128, 313)
        assert np.all(spec.values == np.log(FULL.log_eps))

    def test_full_scale_clip_shape(self):
        rng = np.random.default_rng(0)
        spec = logmel(wave_of(0.1 * rng.standard_normal(160000)), FULL)
        assert spec.values.shape == (128, 313)

    def test_desk_shape(self):
        spec = logmel(wave_of(np.zeros(32000)), DESK)
        assert spec.values.shape == (64, 63)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        samples = 0.2 * rng.standard_normal(32000)
        a = logmel(wave_of(samples), DESK)
        b = logmel(wave_of(samples.copy()), DESK)
        assert np.array_equal(a.values, b.values)

    def test_short_wave_rejected(self):
        with pytest.raises(InvalidInputError):
            logmel(wave_of(np.zeros(100)), DESK)

    def test_nonfinite_rejected(self):
        samples = np.zeros(32000)
        samples[5] = np.nan
        with pytest.raises(InvalidInputError):
            logmel(wave_of(samples), DESK)


class TestTonePlacement:
    def test_1khz_sine_lands_in_its_mel_bin(self):
        sr = 16000
        t = np.arange(10 * sr) / sr
        spec = logmel(wave_of(0.5 * np.sin(2 * np.pi * 1000.0 * t)), FULL)
        # derive the expected bin from the filterbank definition itself
        fb = mel_filterbank(FULL)
        fft_bin_1khz = int(round(1000.0 / (sr / FULL.n_fft)))
        expected_bin = int(np.argmax(fb[:, fft_bin_1khz]))
        per_frame = np.argmax(spec.values, axis=0)
        assert np.all(per_frame == expected_bin)


class TestEnergyAdditivity:
    def test_concatenation_adds_mel_energy(self):
        # exact framing: rectangular window, no centering, hop == n_fft,
        # segment boundary on the frame grid
        cfg = FeatureConfig(n_fft=256, hop=256, n_mels=32, window="rect",
                            center=False, clip_seconds=1.0)
        rng = np.random.default_rng(2)
        a = 0.3 * rng.standard_normal(2048)
        b = 0.3 * rng.standard_normal(1536)
        e_a = mel_power(wave_of(a), cfg).sum()
        e_b = mel_power(wave_of(b), cfg).sum()
        e_ab = mel_power(wave_of(np.concatenate([a, b])), cfg).sum()
        assert e_ab == pytest.approx(e_a + e_b, rel=1e-6)


class TestNormalize:
    def test_affine_map(self):
        spec = LogMelSpec(values=np.array([[0.0, 1.0], [2.0, 3.0]]), frame_hop_s=0.032)
        out = normalize(spec, "minmax01")
        np.testing.assert_allclose(out.values, [[0.0, 1 / 3], [2 / 3, 1.0]])
        assert out.normalization == "minmax01"

    def test_constant_maps_to_half(self):
        spec = LogMelSpec(values=np.full((3, 4), 7.5), frame_hop_s=0.032)
        assert np.all(normalize(spec, "minmax01").values == 0.5)

    def test_constant_zscore_maps_to_zero(self):
        spec = LogMelSpec(values=np.full((3, 4), 7.5), frame_hop_s=0.032)
        assert np.all(normalize(spec, "zscore").values == 0.0)

    @settings(max_examples=100, derandomize=True, deadline=None)
    @given(arrays(np.float64, (4, 5), elements=st.floats(-50, 50)))
    def test_minmax_idempotent(self, values):
        spec = LogMelSpec(values=values, frame_hop_s=0.032)
        once = normalize(spec, "minmax01")
        twice = normalize(once, "minmax01")
        np.testing.assert_array_equal(once.values, twice.values)

    @settings(max_examples=100, derandomize=True, deadline=None)
    @given(arrays(np.float64, (4, 5), elements=st.floats(-50, 50)))
    def test_minmax_range(self, values):
        spec = LogMelSpec(values=values, frame_hop_s=0.032)
        out = normalize(spec, "minmax01").values
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestFixLength:
    def test_pad(self):
        wave = fix_length(wave_of(np.ones(100)), 0.0125)  # 200 samples at 16 kHz
        assert len(wave.samples) == 200
        assert np.all(wave.samples[100:] == 0.0)

    def test_truncate(self):
        wave = fix_length(wave_of(np.ones(400)), 0.0125)
        assert len(wave.samples) == 200
