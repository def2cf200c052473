"""Mono PCM buffers, level measurement, rescaling and SNR-controlled mixing."""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyInputError, FormatError, InvalidDataError

DEFAULT_SAMPLE_RATE = 16000

# RMS level reported for digital silence instead of -inf.
SILENCE_DBFS = -120.0


@dataclass
class AudioBuffer:
    """Mono sample sequence with its sample rate.

    Samples are stored as float64 in nominal range [-1, 1]; operations that
    can overshoot (mixing) may exceed it transiently, the WAV writer clamps.
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise InvalidDataError(f"expected mono 1-D samples, got shape {self.samples.shape}")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidDataError("audio contains non-finite samples")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate


def rms(samples: np.ndarray) -> float:
    """Root-mean-square amplitude of a sample array."""
    if samples.size == 0:
        raise EmptyInputError("cannot compute rms of an empty buffer")
    return float(np.sqrt(np.mean(np.square(samples, dtype=np.float64))))


def rms_dbfs(audio: AudioBuffer) -> float:
    """RMS level in dB relative to full scale (1.0), clamped at -120 dBFS."""
    level = rms(audio.samples)
    if level <= 10.0 ** (SILENCE_DBFS / 20.0):
        return SILENCE_DBFS
    return 20.0 * np.log10(level)


def rescale_to_dbfs(audio: AudioBuffer, target_dbfs: float) -> tuple[AudioBuffer, float]:
    """Scale a buffer so its RMS level equals ``target_dbfs``.

    If the required gain would push any sample magnitude above 1.0, the gain
    is reduced to peak-normalize at 1.0 instead of hard-clipping.  Returns the
    rescaled buffer and the gain actually applied.
    """
    level = rms(audio.samples)
    if level == 0.0:
        raise InvalidDataError("cannot rescale a silent buffer")
    gain = 10.0 ** (target_dbfs / 20.0) / level
    peak = float(np.max(np.abs(audio.samples)))
    if peak * gain > 1.0:
        gain = 1.0 / peak
    return AudioBuffer(audio.samples * gain, audio.sample_rate), gain


def frame_powers(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Mean power of each analysis frame (same frame grid as the STFT)."""
    n_frames = (len(samples) - frame_len) // hop + 1
    if n_frames <= 0:
        raise EmptyInputError("buffer shorter than one frame")
    powers = np.empty(n_frames)
    for i in range(n_frames):
        seg = samples[i * hop : i * hop + frame_len]
        powers[i] = np.mean(seg * seg)
    return powers


def mix_at_snr(
    speech: AudioBuffer,
    speech_labels: np.ndarray,
    noise: AudioBuffer,
    snr_db: float,
    frame_len: int = 320,
    hop: int = 160,
) -> tuple[AudioBuffer, float]:
    """Add noise to speech at a requested SNR, returning (mixture, noise gain).

    Speech power is measured over active frames only (label >= 0.5); noise
    power over the full buffer.  The noise gain g solves
    10*log10(P_s / (g^2 * P_n)) = snr_db.
    """
    if len(speech) != len(noise):
        raise ConfigError(f"length mismatch: speech {len(speech)} vs noise {len(noise)}")
    if speech.sample_rate != noise.sample_rate:
        raise ConfigError("sample rate mismatch between speech and noise")
    labels = np.asarray(speech_labels, dtype=np.float64)
    powers = frame_powers(speech.samples, frame_len, hop)
    if len(labels) != len(powers):
        raise ConfigError(f"label count {len(labels)} does not match frame count {len(powers)}")
    active = labels >= 0.5
    if not np.any(active):
        raise InvalidDataError("no active speech frames: SNR is undefined")
    p_speech = float(np.mean(powers[active]))
    p_noise = float(np.mean(noise.samples * noise.samples))
    if p_noise == 0.0:
        raise InvalidDataError("noise buffer is silent: SNR is undefined")
    gain = float(np.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0))))
    mixed = speech.samples + gain * noise.samples
    return AudioBuffer(mixed, speech.sample_rate), gain


def load_wav(path, expected_rate: int = DEFAULT_SAMPLE_RATE) -> AudioBuffer:
    """Read a 16-bit PCM mono WAV file recorded at the expected sample rate.

    Other rates are rejected; resampling is out of scope for this toolkit.
    """
    try:
        with wave.open(str(path), "rb") as wav:
            n_channels = wav.getnchannels()
            sample_width = wav.getsampwidth()
            rate = wav.getframerate()
            n_frames = wav.getnframes()
            raw = wav.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"not a readable WAV file: {path} ({exc})") from exc
    if n_channels != 1:
        raise FormatError(f"expected mono WAV, got {n_channels} channels: {path}")
    if sample_width != 2:
        raise FormatError(f"expected 16-bit PCM WAV, got {8 * sample_width}-bit: {path}")
    if rate != expected_rate:
        raise FormatError(f"expected {expected_rate} Hz WAV, got {rate} Hz: {path}")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, rate)


def save_wav(path, audio: AudioBuffer) -> None:
    """Write a buffer as 16-bit PCM mono WAV, clamping samples to full scale."""
    clipped = np.clip(audio.samples, -1.0, 32767.0 / 32768.0)
    pcm = np.round(clipped * 32768.0).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(audio.sample_rate)
        wav.writeframes(pcm.tobytes())
