"""Deterministic signal synthesis: speech pairs and noise beds."""

import numpy as np
import pytest

from bcvad.errors import ConfigError
from bcvad.synth import SynthProfile, synth_distractor, synth_noise, synth_speech_pair


def band_density_db(samples, fs, lo, hi):
    """Mean periodogram power density (dB) inside [lo, hi) Hz."""
    spectrum = np.abs(np.fft.rfft(samples)) ** 2
    freqs = np.fft.rfftfreq(len(samples), d=1.0 / fs)
    band = (freqs >= lo) & (freqs < hi)
    return 10.0 * np.log10(np.mean(spectrum[band]))


class TestSpeechPair:
    def test_exact_length(self):
        air, bc = synth_speech_pair(30.0, SynthProfile("target_speech", seed=1))
        assert len(air) == 480000
        assert len(bc) == 480000

    def test_determinism(self):
        profile = SynthProfile("target_speech", seed=42, pause_density=0.4)
        a1, b1 = synth_speech_pair(5.0, profile)
        a2, b2 = synth_speech_pair(5.0, profile)
        np.testing.assert_array_equal(a1.samples, a2.samples)
        np.testing.assert_array_equal(b1.samples, b2.samples)

    def test_bc_attenuation_above_2khz(self):
        air, bc = synth_speech_pair(10.0, SynthProfile("target_speech", seed=3, pause_density=0.3))
        spectrum_air = np.abs(np.fft.rfft(air.samples)) ** 2
        spectrum_bc = np.abs(np.fft.rfft(bc.samples)) ** 2
        freqs = np.fft.rfftfreq(len(air), d=1.0 / 16000)
        hi = freqs > 2000.0
        ratio_db = 10 * np.log10(np.sum(spectrum_bc[hi]) / np.sum(spectrum_air[hi]))
        assert ratio_db <= -20.0

    def test_speaker_seed_pins_voice_traits(self):
        p1 = SynthProfile("target_speech", seed=1, speaker_seed=77)
        p2 = SynthProfile("target_speech", seed=2, speaker_seed=77)
        from bcvad.synth import _voice_traits

        assert _voice_traits(77) == _voice_traits(77)
        a1, _ = synth_speech_pair(2.0, p1)
        a2, _ = synth_speech_pair(2.0, p2)
        # same voice, different content
        assert not np.array_equal(a1.samples, a2.samples)

    def test_noise_kind_rejected(self):
        with pytest.raises(ConfigError):
            synth_speech_pair(1.0, SynthProfile("white_noise", seed=0))

    def test_pause_density_controls_silence(self):
        sparse, _ = synth_speech_pair(20.0, SynthProfile("target_speech", seed=5, pause_density=0.8))
        dense, _ = synth_speech_pair(20.0, SynthProfile("target_speech", seed=5, pause_density=0.1))
        assert np.mean(sparse.samples == 0.0) > np.mean(dense.samples == 0.0)


class TestNoise:
    def test_white_octave_density_flat(self):
        noise = synth_noise(30.0, SynthProfile("white_noise", seed=9))
        densities = [
            band_density_db(noise.samples, 16000, 62.5 * 2**i, 125.0 * 2**i) for i in range(7)
        ]
        assert max(densities) - min(densities) <= 3.0  # within +-1.5 dB of flat

    def test_pink_slope_minus_3db_per_octave(self):
        noise = synth_noise(30.0, SynthProfile("pink_noise", seed=9))
        octaves = np.arange(7)
        densities = [
            band_density_db(noise.samples, 16000, 62.5 * 2**i, 125.0 * 2**i) for i in octaves
        ]
        slope = np.polyfit(octaves, densities, 1)[0]
        assert slope == pytest.approx(-3.01, abs=1.0)

    def test_determinism(self):
        for kind in ("white_noise", "pink_noise", "babble"):
            n1 = synth_noise(2.0, SynthProfile(kind, seed=4))
            n2 = synth_noise(2.0, SynthProfile(kind, seed=4))
            np.testing.assert_array_equal(n1.samples, n2.samples)

    def test_babble_is_nonstationary_speech_mixture(self):
        babble = synth_noise(10.0, SynthProfile("babble", seed=6))
        # frame powers fluctuate far more than for white noise
        frames = babble.samples[: 160 * 990].reshape(-1, 160)
        powers = np.mean(frames**2, axis=1)
        white = synth_noise(10.0, SynthProfile("white_noise", seed=6))
        wframes = white.samples[: 160 * 990].reshape(-1, 160)
        wpowers = np.mean(wframes**2, axis=1)
        assert np.std(powers) / np.mean(powers) > 3 * np.std(wpowers) / np.mean(wpowers)

    def test_speech_kind_rejected(self):
        with pytest.raises(ConfigError):
            synth_noise(1.0, SynthProfile("target_speech", seed=0))

    def test_distractor_is_deterministic(self):
        d1 = synth_distractor(2.0, seed=13)
        d2 = synth_distractor(2.0, seed=13)
        np.testing.assert_array_equal(d1.samples, d2.samples)


class TestSynthProfile:
    def test_pitch_range_bounds(self):
        with pytest.raises(ConfigError):
            SynthProfile("target_speech", pitch_range=(40.0, 200.0))

    def test_pause_density_bounds(self):
        with pytest.raises(ConfigError):
            SynthProfile("target_speech", pause_density=1.5)

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            SynthProfile("brown_noise")
