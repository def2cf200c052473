"""Spectrogram, Mel filterbank and log-Mel feature contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcvad.audio import AudioBuffer
from bcvad.errors import ConfigError, EmptyInputError, InvalidDataError
from bcvad.features import (
    AIR_FEATURES,
    BC_FEATURES,
    LOG_MEL_FLOOR,
    SpectrogramConfig,
    hz_to_mel,
    log_mel_features,
    make_window,
    mel_filterbank,
    stft_magnitude,
)

CFG = SpectrogramConfig()


def dft_magnitude_oracle(frame, fft_size):
    """Naive windowed DFT of one frame: independent of the rfft-based path."""
    windowed = np.zeros(fft_size)
    windowed[: len(frame)] = frame * make_window("hann", len(frame))
    n = np.arange(fft_size)
    mags = []
    for k in range(fft_size // 2 + 1):
        re = np.sum(windowed * np.cos(2 * np.pi * k * n / fft_size))
        im = -np.sum(windowed * np.sin(2 * np.pi * k * n / fft_size))
        mags.append(np.hypot(re, im))
    return np.array(mags)


class TestStftMagnitude:
    def test_zero_input_gives_zero_frame(self):
        mag = stft_magnitude(AudioBuffer(np.zeros(320)), CFG)
        assert mag.frames.shape == (1, 257)
        assert np.all(mag.frames == 0.0)

    def test_1khz_sine_peaks_at_bin_32(self):
        t = np.arange(16000) / 16000.0
        audio = AudioBuffer(np.sin(2 * np.pi * 1000.0 * t))
        mag = stft_magnitude(audio, CFG)
        assert mag.n_frames == 99
        assert np.all(np.argmax(mag.frames, axis=1) == round(1000 / 16000 * 512))

    def test_first_frame_matches_direct_dft(self):
        rng = np.random.default_rng(5)
        samples = 0.4 * rng.standard_normal(320)
        mag = stft_magnitude(AudioBuffer(samples), CFG)
        oracle = dft_magnitude_oracle(samples, 512)
        np.testing.assert_allclose(mag.frames[0], oracle, atol=1e-9)

    def test_dc_response_of_constant_signal(self):
        # bin 0 of a constant c is c * sum(window)
        mag = stft_magnitude(AudioBuffer(np.full(320, 0.5)), CFG)
        window_sum = np.sum(make_window("hann", 320))
        assert mag.frames[0, 0] == pytest.approx(0.5 * window_sum, rel=1e-12)

    def test_too_short_input_rejected(self):
        with pytest.raises(EmptyInputError):
            stft_magnitude(AudioBuffer(np.zeros(319)), CFG)

    def test_non_finite_sample_rejected(self):
        audio = AudioBuffer(np.zeros(400))
        audio.samples[10] = np.inf  # mutate after construction-time validation
        with pytest.raises(InvalidDataError):
            stft_magnitude(audio, CFG)

    def test_homogeneity(self):
        rng = np.random.default_rng(9)
        samples = rng.standard_normal(2000) * 0.1
        base = stft_magnitude(AudioBuffer(samples), CFG).frames
        for c in (0.5, 3.0, 7.25):
            scaled = stft_magnitude(AudioBuffer(samples * c), CFG).frames
            np.testing.assert_allclose(scaled, c * base, rtol=1e-9)

    @given(st.integers(min_value=320, max_value=50_000))
    @settings(max_examples=60, deadline=None)
    def test_frame_count_formula(self, n_samples):
        mag = stft_magnitude(AudioBuffer(np.zeros(n_samples)), CFG)
        assert mag.n_frames == (n_samples - 320) // 160 + 1


class TestMelFilterbank:
    def test_mel_of_700_hz(self):
        assert hz_to_mel(700.0) == pytest.approx(2595 * np.log10(2), rel=1e-12)

    def test_single_filter_degenerate_case(self):
        bank = mel_filterbank(16000, 512, 1, 50.0, 2000.0)
        assert bank.weights.shape == (1, 257)
        freqs = np.arange(257) * 16000 / 512
        assert np.all(bank.weights[0][freqs <= 50.0] == 0.0)
        assert np.all(bank.weights[0][freqs >= 2000.0] == 0.0)
        # one triangle: rises then falls around the mel midpoint of [50, 2000]
        support = np.flatnonzero(bank.weights[0])
        assert support.size > 0
        assert np.array_equal(support, np.arange(support[0], support[-1] + 1))
        peak = np.argmax(bank.weights[0])
        assert np.all(np.diff(bank.weights[0][support[0] : peak + 1]) > 0)
        assert np.all(np.diff(bank.weights[0][peak : support[-1] + 1]) < 0)

    def test_bc_band_confinement(self):
        bank = BC_FEATURES.build_bank()
        assert bank.weights.shape == (32, 257)
        freqs = np.arange(257) * 16000 / 512
        outside = (freqs <= 50.0) | (freqs >= 2000.0)
        assert np.all(bank.weights[:, outside] == 0.0)

    def test_rows_are_ordered_contiguous_nonnegative(self):
        for feat in (BC_FEATURES, AIR_FEATURES):
            bank = feat.build_bank()
            assert np.all(bank.weights >= 0.0)
            assert np.all(np.diff(bank.centers_hz) > 0.0)
            for row in bank.weights:
                support = np.flatnonzero(row)
                assert support.size >= 1
                assert np.array_equal(support, np.arange(support[0], support[-1] + 1))

    def test_invalid_band_rejected(self):
        with pytest.raises(ConfigError):
            mel_filterbank(16000, 512, 8, 2000.0, 50.0)
        with pytest.raises(ConfigError):
            mel_filterbank(16000, 512, 8, 100.0, 9000.0)

    def test_tone_at_center_maximizes_own_filter(self):
        t = np.arange(8000) / 16000.0
        for feat in (BC_FEATURES, AIR_FEATURES):
            bank = feat.build_bank()
            for j in range(0, bank.n_mels, 3):
                tone = AudioBuffer(0.5 * np.sin(2 * np.pi * bank.centers_hz[j] * t))
                mag = stft_magnitude(tone, feat.spectrogram)
                mel_energy = (mag.frames @ bank.weights.T).mean(axis=0)
                assert np.argmax(mel_energy) == j


class TestLogMel:
    def test_zero_frame_hits_floor(self):
        mag = stft_magnitude(AudioBuffer(np.zeros(480)), CFG)
        out = log_mel_features(mag, BC_FEATURES.build_bank())
        assert np.all(out.frames == np.log(LOG_MEL_FLOOR))

    def test_bc_and_air_widths(self):
        audio = AudioBuffer(0.1 * np.sin(2 * np.pi * 440 * np.arange(3200) / 16000))
        mag = stft_magnitude(audio, CFG)
        assert log_mel_features(mag, BC_FEATURES.build_bank()).frames.shape[1] == 32
        assert log_mel_features(mag, AIR_FEATURES.build_bank()).frames.shape[1] == 64

    def test_dimension_mismatch_rejected(self):
        mag = stft_magnitude(AudioBuffer(np.zeros(480)), CFG)
        bank = mel_filterbank(16000, 1024, 32, 50.0, 2000.0)
        with pytest.raises(ConfigError):
            log_mel_features(mag, bank)

    def test_values_never_below_floor(self):
        rng = np.random.default_rng(2)
        audio = AudioBuffer(0.05 * rng.standard_normal(4800))
        mag = stft_magnitude(audio, CFG)
        out = log_mel_features(mag, BC_FEATURES.build_bank())
        assert np.all(out.frames >= np.log(LOG_MEL_FLOOR))


class TestSpectrogramConfig:
    def test_defaults(self):
        assert CFG.frame_len == 320
        assert CFG.hop == 160
        assert CFG.n_bins == 257

    def test_fft_smaller_than_frame_rejected(self):
        with pytest.raises(ConfigError):
            SpectrogramConfig(fft_size=256)

    def test_bad_hop_fraction_rejected(self):
        with pytest.raises(ConfigError):
            SpectrogramConfig(hop_fraction=0.0)
