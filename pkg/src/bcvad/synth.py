"""Parametric generators for target speech, distractor speech and noise beds.

Speech is a harmonic pulse train with a randomized pitch contour, shaped by a
cascade of formant resonators and amplitude envelopes, interleaved with
silences.  The bone-conduction variant of a speech signal is the same content
passed through a steep low-pass channel, so energy above 2 kHz sits at least
20 dB below the air variant.  Everything is a pure function of the profile
seed, so corpora can be regenerated bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

from .audio import DEFAULT_SAMPLE_RATE, AudioBuffer
from .errors import ConfigError

SPEECH_KINDS = ("target_speech", "distractor_speech")
NOISE_KINDS = ("white_noise", "pink_noise", "babble")

# Cutoff / order of the bone-conduction channel low-pass.
BC_CUTOFF_HZ = 900.0
BC_FILTER_ORDER = 5

BABBLE_TALKERS = 6
NOISE_RMS = 0.1


@dataclass(frozen=True)
class SynthProfile:
    """Recipe for one generated signal.

    ``seed`` drives segment timing and contours; ``speaker_seed`` (when given)
    pins the voice traits - formant set and base level - so the same synthetic
    speaker can utter different content across clips.
    """

    kind: str
    pitch_range: tuple[float, float] = (100.0, 220.0)
    pause_density: float = 0.5
    seed: int = 0
    speaker_seed: int | None = None

    def __post_init__(self):
        if self.kind not in SPEECH_KINDS + NOISE_KINDS:
            raise ConfigError(f"unknown synth kind: {self.kind!r}")
        lo, hi = self.pitch_range
        if not (60.0 <= lo < hi <= 400.0):
            raise ConfigError(f"pitch_range must lie within [60, 400] Hz, got {self.pitch_range}")
        if not (0.0 <= self.pause_density <= 1.0):
            raise ConfigError(f"pause_density must be in [0, 1], got {self.pause_density}")


@dataclass(frozen=True)
class VoiceTraits:
    """Formant set and base level of one synthetic speaker."""

    formants: tuple[tuple[float, float], ...]  # (center Hz, bandwidth Hz)
    base_amplitude: float


def _voice_traits(trait_seed: int) -> VoiceTraits:
    rng = np.random.default_rng(trait_seed)
    formants = (
        (rng.uniform(320.0, 850.0), rng.uniform(60.0, 110.0)),
        (rng.uniform(950.0, 2200.0), rng.uniform(80.0, 140.0)),
        (rng.uniform(2300.0, 3300.0), rng.uniform(100.0, 180.0)),
    )
    return VoiceTraits(formants, rng.uniform(0.20, 0.35))


def _resonator(x: np.ndarray, center_hz: float, bandwidth_hz: float, fs: int) -> np.ndarray:
    """Two-pole resonant filter; overall level is normalized by the caller."""
    r = np.exp(-np.pi * bandwidth_hz / fs)
    theta = 2.0 * np.pi * center_hz / fs
    return sp_signal.lfilter([1.0 - r], [1.0, -2.0 * r * np.cos(theta), r * r], x)


def _voiced_segment(
    rng: np.random.Generator, n: int, fs: int, traits: VoiceTraits, pitch_range
) -> np.ndarray:
    """One sustained voiced stretch: pitch-contoured sawtooth through formants."""
    t = np.arange(n) / fs
    f0 = rng.uniform(*pitch_range)
    drift = rng.uniform(-0.12, 0.12)
    vib_rate = rng.uniform(2.0, 6.0)
    vib_depth = rng.uniform(0.01, 0.05)
    contour = f0 * (1.0 + drift * t / max(t[-1], 1e-9) + vib_depth * np.sin(
        2.0 * np.pi * vib_rate * t + rng.uniform(0.0, 2.0 * np.pi)))
    contour = np.clip(contour, 60.0, 400.0)
    phase = 2.0 * np.pi * np.cumsum(contour) / fs
    source = (phase / np.pi) % 2.0 - 1.0  # sawtooth, harmonics decaying ~1/k
    source = source + 0.03 * rng.standard_normal(n)  # aspiration
    for center_hz, bandwidth_hz in traits.formants:
        source = _resonator(source, center_hz, bandwidth_hz, fs)
    source = source / max(np.sqrt(np.mean(source * source)), 1e-12)

    fade = min(int(0.06 * fs), max(n // 4, 1))
    envelope = np.ones(n)
    ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(fade) / fade)
    envelope[:fade] = ramp
    envelope[n - fade:] = ramp[::-1]
    am = 1.0 + 0.15 * np.sin(
        2.0 * np.pi * rng.uniform(2.0, 5.0) * t + rng.uniform(0.0, 2.0 * np.pi))
    level = traits.base_amplitude * rng.uniform(0.55, 1.0)
    return source * envelope * am * level


def bc_channel(air: AudioBuffer) -> AudioBuffer:
    """Bone-conduction transfer: steep low-pass of the air-conduction signal."""
    sos = sp_signal.butter(
        BC_FILTER_ORDER, BC_CUTOFF_HZ, btype="low", fs=air.sample_rate, output="sos")
    return AudioBuffer(sp_signal.sosfilt(sos, air.samples), air.sample_rate)


def synth_speech_pair(
    duration_s: float, profile: SynthProfile, sample_rate: int = DEFAULT_SAMPLE_RATE
) -> tuple[AudioBuffer, AudioBuffer]:
    """Generate parallel (air, bone-conduction) speech of exactly ``duration_s``."""
    if profile.kind not in SPEECH_KINDS:
        raise ConfigError(f"synth_speech_pair needs a speech kind, got {profile.kind!r}")
    if duration_s <= 0:
        raise ConfigError(f"duration_s must be positive, got {duration_s}")
    n_total = int(round(duration_s * sample_rate))
    rng = np.random.default_rng(profile.seed)
    trait_seed = profile.seed if profile.speaker_seed is None else profile.speaker_seed
    traits = _voice_traits(trait_seed)

    air = np.zeros(n_total)
    pd = profile.pause_density
    if pd < 0.999:
        voiced_mean = 1.05  # seconds; silences scale off this to hit pause_density
        silence_mean = voiced_mean * pd / (1.0 - pd)
        pos = 0
        voiced_turn = rng.random() >= pd
        while pos < n_total:
            if voiced_turn:
                seg_len = int(rng.uniform(0.35, 1.8) * sample_rate)
                seg_len = min(seg_len, n_total - pos)
                if seg_len > int(0.05 * sample_rate):
                    air[pos : pos + seg_len] = _voiced_segment(
                        rng, seg_len, sample_rate, traits, profile.pitch_range)
                pos += seg_len
            else:
                pos += int(rng.uniform(0.4, 1.6) * silence_mean * sample_rate)
            voiced_turn = not voiced_turn

    peak = np.max(np.abs(air))
    if peak > 0.99:
        air *= 0.99 / peak
    air_buf = AudioBuffer(air, sample_rate)
    return air_buf, bc_channel(air_buf)


def synth_noise(
    duration_s: float, profile: SynthProfile, sample_rate: int = DEFAULT_SAMPLE_RATE
) -> AudioBuffer:
    """Generate a noise bed: white, pink (-3 dB/octave) or multi-talker babble."""
    if profile.kind not in NOISE_KINDS:
        raise ConfigError(f"synth_noise needs a noise kind, got {profile.kind!r}")
    if duration_s <= 0:
        raise ConfigError(f"duration_s must be positive, got {duration_s}")
    n_total = int(round(duration_s * sample_rate))
    rng = np.random.default_rng(profile.seed)

    if profile.kind == "white_noise":
        out = NOISE_RMS * rng.standard_normal(n_total)
    elif profile.kind == "pink_noise":
        white = rng.standard_normal(n_total)
        spectrum = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n_total, d=1.0 / sample_rate)
        spectrum[0] = 0.0
        spectrum[1:] *= np.sqrt(freqs[1] / freqs[1:])  # power ~ 1/f
        out = np.fft.irfft(spectrum, n=n_total)
        out *= NOISE_RMS / np.sqrt(np.mean(out * out))
    else:  # babble
        out = np.zeros(n_total)
        for _ in range(BABBLE_TALKERS):
            lo = rng.uniform(80.0, 240.0)
            talker = SynthProfile(
                kind="distractor_speech",
                pitch_range=(lo, lo + rng.uniform(40.0, 120.0)),
                pause_density=rng.uniform(0.35, 0.55),
                seed=int(rng.integers(0, 2**63)),
            )
            talker_air, _ = synth_speech_pair(duration_s, talker, sample_rate)
            out += talker_air.samples
        out *= NOISE_RMS / max(np.sqrt(np.mean(out * out)), 1e-12)
    return AudioBuffer(np.clip(out, -1.0, 1.0), sample_rate)


def synth_distractor(
    duration_s: float, seed: int, sample_rate: int = DEFAULT_SAMPLE_RATE
) -> AudioBuffer:
    """Single competing talker (air path), used as the external-speech term."""
    rng = np.random.default_rng(seed)
    lo = rng.uniform(80.0, 260.0)
    profile = SynthProfile(
        kind="distractor_speech",
        pitch_range=(lo, lo + rng.uniform(40.0, 120.0)),
        pause_density=rng.uniform(0.3, 0.5),
        seed=int(rng.integers(0, 2**63)),
    )
    air, _ = synth_speech_pair(duration_s, profile, sample_rate)
    return air
