"""Time-frequency front end: framing, windowed padded FFT, Mel filterbank, log-Mel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer
from .errors import ConfigError, EmptyInputError, InvalidDataError

# Floor applied inside the log to keep digital silence finite.
LOG_MEL_FLOOR = 1e-10


def hz_to_mel(f_hz):
    """HTK Mel scale: m = 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f_hz, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    """Inverse of :func:`hz_to_mel`."""
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def make_window(name: str, length: int) -> np.ndarray:
    """Analysis window by name; 'hann' is periodic (DFT-even), suited to 50% overlap."""
    if name == "hann":
        n = np.arange(length)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    if name == "rect":
        return np.ones(length)
    raise ConfigError(f"unknown window: {name!r}")


@dataclass(frozen=True)
class SpectrogramConfig:
    """Framing and FFT parameters for magnitude spectrogram analysis."""

    sample_rate: int = 16000
    frame_ms: float = 20.0
    hop_fraction: float = 0.5
    fft_size: int = 512
    window: str = "hann"

    def __post_init__(self):
        if not (0.0 < self.hop_fraction <= 1.0):
            raise ConfigError(f"hop_fraction must be in (0, 1], got {self.hop_fraction}")
        if self.fft_size < self.frame_len:
            raise ConfigError(
                f"fft_size {self.fft_size} smaller than frame of {self.frame_len} samples"
            )

    @property
    def frame_len(self) -> int:
        return int(round(self.sample_rate * self.frame_ms / 1000.0))

    @property
    def hop(self) -> int:
        return int(round(self.frame_len * self.hop_fraction))

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def hop_s(self) -> float:
        return self.hop / self.sample_rate

    def frame_count(self, n_samples: int) -> int:
        """Number of full frames in a signal of ``n_samples`` samples."""
        if n_samples < self.frame_len:
            return 0
        return (n_samples - self.frame_len) // self.hop + 1


@dataclass
class MagSpectrogram:
    """Time-major magnitude spectrogram (T frames x fft_size/2+1 bins)."""

    frames: np.ndarray
    config: SpectrogramConfig

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


def frame_signal(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Slice a 1-D signal into overlapping frames, one per row."""
    n_frames = (len(samples) - frame_len) // hop + 1
    idx = hop * np.arange(n_frames)[:, None] + np.arange(frame_len)[None, :]
    return samples[idx]


def stft_magnitude(audio: AudioBuffer, cfg: SpectrogramConfig | None = None) -> MagSpectrogram:
    """Windowed, zero-padded STFT magnitudes of a mono buffer.

    Each 20 ms frame is windowed, zero-padded to ``fft_size`` and transformed;
    the magnitude of bins 0..fft_size/2 is returned.
    """
    cfg = cfg or SpectrogramConfig()
    if audio.sample_rate != cfg.sample_rate:
        raise ConfigError(
            f"audio at {audio.sample_rate} Hz does not match config {cfg.sample_rate} Hz"
        )
    if len(audio) < cfg.frame_len:
        raise EmptyInputError(f"need at least {cfg.frame_len} samples, got {len(audio)}")
    if not np.all(np.isfinite(audio.samples)):
        raise InvalidDataError("audio contains non-finite samples")
    frames = frame_signal(audio.samples, cfg.frame_len, cfg.hop)
    windowed = frames * make_window(cfg.window, cfg.frame_len)[None, :]
    spectrum = np.fft.rfft(windowed, n=cfg.fft_size, axis=1)
    return MagSpectrogram(np.abs(spectrum), cfg)


@dataclass
class MelFilterBank:
    """Triangular filters with peaks spaced uniformly on the Mel scale."""

    weights: np.ndarray  # (n_mels, n_bins), non-negative
    centers_hz: np.ndarray
    sample_rate: int
    fft_size: int
    f_min: float
    f_max: float

    @property
    def n_mels(self) -> int:
        return self.weights.shape[0]


def mel_filterbank(
    sample_rate: int,
    fft_size: int,
    n_mels: int,
    f_min: float,
    f_max: float,
) -> MelFilterBank:
    """Build a bank of triangular Mel filters with peak value 1 (no area norm)."""
    if not (0.0 <= f_min < f_max <= sample_rate / 2.0):
        raise ConfigError(f"invalid band [{f_min}, {f_max}] Hz for rate {sample_rate}")
    if n_mels < 1:
        raise ConfigError(f"n_mels must be >= 1, got {n_mels}")
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    weights = np.zeros((n_mels, fft_size // 2 + 1))
    for j in range(n_mels):
        left, center, right = edges_hz[j], edges_hz[j + 1], edges_hz[j + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        weights[j] = np.clip(np.minimum(rising, falling), 0.0, None)
    return MelFilterBank(weights, edges_hz[1:-1], sample_rate, fft_size, f_min, f_max)


@dataclass
class LogMelFrames:
    """Log Mel-filterbank energies, one row per STFT frame."""

    frames: np.ndarray  # (T, n_mels)
    hop_s: float
    n_mels: int


def log_mel_features(mag: MagSpectrogram, bank: MelFilterBank) -> LogMelFrames:
    """Pool spectrogram magnitudes through the filterbank, then take ln with floor."""
    if bank.fft_size != mag.config.fft_size or bank.sample_rate != mag.config.sample_rate:
        raise ConfigError("filterbank FFT size / sample rate do not match the spectrogram")
    energies = mag.frames @ bank.weights.T
    out = np.log(np.maximum(energies, LOG_MEL_FLOOR))
    return LogMelFrames(out, mag.config.hop_s, bank.n_mels)


@dataclass(frozen=True)
class FeatureConfig:
    """Full front-end configuration: spectrogram plus Mel pooling."""

    spectrogram: SpectrogramConfig = SpectrogramConfig()
    n_mels: int = 32
    f_min: float = 50.0
    f_max: float = 2000.0

    def build_bank(self) -> MelFilterBank:
        return mel_filterbank(
            self.spectrogram.sample_rate,
            self.spectrogram.fft_size,
            self.n_mels,
            self.f_min,
            self.f_max,
        )


# Bone-conduction front end: 32 Mel bins over 50-2000 Hz.
BC_FEATURES = FeatureConfig(n_mels=32, f_min=50.0, f_max=2000.0)

# Air-conduction front end: 64 Mel bins over 150-5000 Hz.
AIR_FEATURES = FeatureConfig(n_mels=64, f_min=150.0, f_max=5000.0)


def compute_log_mel(audio: AudioBuffer, feat: FeatureConfig) -> LogMelFrames:
    """Convenience: STFT magnitudes pooled to log-Mel in one call."""
    return log_mel_features(stft_magnitude(audio, feat.spectrogram), feat.build_bank())
