"""Energy-threshold label rule and causal smoothing."""

import numpy as np
import pytest

from bcvad.errors import ConfigError, EmptyInputError
from bcvad.features import MagSpectrogram, SpectrogramConfig
from bcvad.labels import LabelTrack, binarize, generate_labels, smooth_labels

CFG = SpectrogramConfig()


def spectrogram_with_norms(norms):
    """Build a spectrogram whose per-frame Euclidean norms are given exactly."""
    frames = np.zeros((len(norms), CFG.n_bins))
    frames[:, 0] = norms
    return MagSpectrogram(frames, CFG)


class TestGenerateLabels:
    def test_constant_input_yields_all_zero(self):
        # threshold is c + 0.3c = 1.3c, strictly above every norm
        labels = generate_labels(spectrogram_with_norms(np.full(50, 2.0)))
        assert np.all(labels.values == 0.0)

    def test_loud_minority_is_detected(self):
        norms = np.zeros(100)
        norms[40:50] = 10.0
        labels = generate_labels(spectrogram_with_norms(norms))
        # T = 0 + 0.3 * avg = 0.3: exactly the ten loud frames exceed it
        expected = (norms > 0.3).astype(float)
        np.testing.assert_array_equal(labels.values, expected)

    def test_default_alpha(self):
        import inspect

        assert inspect.signature(generate_labels).parameters["alpha"].default == 0.3

    def test_empty_spectrogram_rejected(self):
        with pytest.raises(EmptyInputError):
            generate_labels(MagSpectrogram(np.zeros((0, CFG.n_bins)), CFG))

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        norms = np.abs(rng.standard_normal(200)) * rng.choice([0.01, 1.0], size=200)
        base = generate_labels(spectrogram_with_norms(norms))
        for c in (0.1, 7.0, 1234.5):
            scaled = generate_labels(spectrogram_with_norms(norms * c))
            np.testing.assert_array_equal(scaled.values, base.values)


class TestSmoothLabels:
    def test_all_ones_stay_ones(self):
        out = smooth_labels(LabelTrack(np.ones(100)))
        np.testing.assert_allclose(out.values, 1.0, atol=1e-12)

    def test_impulse_response(self):
        values = np.zeros(100)
        values[40] = 1.0
        out = smooth_labels(LabelTrack(values), window_s=0.2)  # L = 20 frames
        np.testing.assert_allclose(out.values[40:60], 1 / 20, atol=1e-12)
        assert np.all(out.values[:40] == 0.0)
        assert np.all(out.values[60:] == 0.0)

    def test_startup_uses_partial_window(self):
        values = np.ones(5)
        out = smooth_labels(LabelTrack(values), window_s=0.2)
        np.testing.assert_allclose(out.values, 1.0, atol=1e-12)

    def test_mean_preserved_mid_track(self):
        rng = np.random.default_rng(8)
        values = (rng.random(500) < 0.3).astype(float)
        out = smooth_labels(LabelTrack(values), window_s=0.2)
        # away from the startup ramp, the causal average preserves mass
        assert np.mean(out.values[19:]) == pytest.approx(np.mean(values[19:]), abs=0.02)

    def test_stays_in_unit_interval(self):
        rng = np.random.default_rng(12)
        values = rng.random(300)
        out = smooth_labels(LabelTrack(values), window_s=0.37)
        assert out.values.min() >= 0.0
        assert out.values.max() <= 1.0

    def test_window_of_one_frame_is_identity(self):
        values = (np.random.default_rng(1).random(50) < 0.5).astype(float)
        out = smooth_labels(LabelTrack(values), window_s=0.01)
        np.testing.assert_array_equal(binarize(out), values.astype(np.int8))

    def test_non_positive_window_rejected(self):
        with pytest.raises(ConfigError):
            smooth_labels(LabelTrack(np.ones(10)), window_s=0.0)


class TestLabelTrack:
    def test_out_of_range_values_rejected(self):
        with pytest.raises(ConfigError):
            LabelTrack(np.array([0.0, 1.2]))

    def test_speech_fraction(self):
        track = LabelTrack(np.array([1.0, 1.0, 0.0, 0.0]))
        assert track.speech_fraction == 0.5

    def test_text_roundtrip(self, tmp_path):
        from bcvad.labels import load_label_track, save_label_track

        track = LabelTrack(np.array([0.0, 0.25, 1.0]))
        path = tmp_path / "labels.txt"
        save_label_track(path, track)
        loaded = load_label_track(path)
        np.testing.assert_allclose(loaded.values, track.values, atol=1e-8)
