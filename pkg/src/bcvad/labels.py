"""Per-frame speech targets from clean speech energy, plus causal smoothing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyInputError
from .features import MagSpectrogram

DEFAULT_ALPHA = 0.3
DEFAULT_SMOOTH_WINDOW_S = 0.2


@dataclass
class LabelTrack:
    """One value in [0, 1] per STFT frame (binary raw, soft after smoothing)."""

    values: np.ndarray
    frame_hop_s: float = 0.01

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ConfigError("label track must be 1-D")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ConfigError("label values must lie in [0, 1]")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def speech_fraction(self) -> float:
        """Fraction of frames marked active (value >= 0.5)."""
        if len(self) == 0:
            return 0.0
        return float(np.mean(self.values >= 0.5))


def generate_labels(clean_speech: MagSpectrogram, alpha: float = DEFAULT_ALPHA) -> LabelTrack:
    """Binary per-frame targets from the clean-speech spectrogram.

    A frame is speech when the Euclidean norm of its magnitude vector strictly
    exceeds T = min_n(norm) + alpha * avg_n(norm).  On constant input the
    strict comparison yields all zeros.
    """
    if clean_speech.n_frames == 0:
        raise EmptyInputError("cannot label an empty spectrogram")
    norms = np.linalg.norm(clean_speech.frames, axis=1)
    threshold = norms.min() + alpha * norms.mean()
    return LabelTrack((norms > threshold).astype(np.float64), clean_speech.config.hop_s)


def smooth_labels(labels: LabelTrack, window_s: float = DEFAULT_SMOOTH_WINDOW_S) -> LabelTrack:
    """Causal moving average of the label track.

    The averaging length is round(window_s / hop); frames before the window
    fills use the mean over the history available so far, avoiding label lag
    at clip starts.
    """
    if window_s <= 0.0:
        raise ConfigError(f"window_s must be positive, got {window_s}")
    length = max(1, int(round(window_s / labels.frame_hop_s)))
    values = labels.values
    csum = np.concatenate([[0.0], np.cumsum(values)])
    n = np.arange(len(values))
    start = np.maximum(0, n - length + 1)
    smoothed = (csum[n + 1] - csum[start]) / (n - start + 1)
    return LabelTrack(np.clip(smoothed, 0.0, 1.0), labels.frame_hop_s)


def binarize(labels: LabelTrack, threshold: float = 0.5) -> np.ndarray:
    """Hard 0/1 decisions from a soft track: value > threshold (strict)."""
    return (labels.values > threshold).astype(np.int8)


def save_label_track(path, labels: LabelTrack) -> None:
    """Write a label track as plain text, one float per line."""
    with open(path, "w", encoding="ascii") as fh:
        for v in labels.values:
            fh.write(f"{v:.8f}\n")


def load_label_track(path, frame_hop_s: float = 0.01) -> LabelTrack:
    """Read a plain-text label track written by :func:`save_label_track`."""
    with open(path, "r", encoding="ascii") as fh:
        values = [float(line) for line in fh if line.strip()]
    return LabelTrack(np.asarray(values), frame_hop_s)
