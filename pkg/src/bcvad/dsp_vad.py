"""Statistical per-frame VAD: Gaussian likelihood-ratio test over frequency bins.

Model: noisy spectral coefficients Y(k) = S(k) + N(k) with complex-Gaussian
speech and noise.  Per frame:

    gamma(k) = |Y(k)|^2 / var_n(k)                 a-posteriori SNR
    xi(k)    = beta * proxy(k) + (1-beta) * max(gamma(k) - 1, 0)
    llr(k)   = gamma*xi/(1+xi) - ln(1+xi)          per-bin log likelihood ratio
    score    = mean_k llr(k),  speech iff score > ln(eta)

where proxy is the previous frame's gamma*xi/(1+xi) (decision-directed prior
SNR with the squared Wiener-gain carry-over).  The noise variance estimate is
updated ONLY on non-speech frames:

    var_n(k) <- alpha0 * var_n(k) + (1-alpha0) * |Y(k)|^2     when decision=0

and is left untouched while speech is present, so speech energy cannot leak
into the noise tracker.  Setting ``corrected=False`` flips the update to
speech frames, reproducing the drifting variant for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, EmptyInputError
from .features import MagSpectrogram

EPS_VARIANCE_FLOOR = 1e-12


@dataclass
class DspVadParams:
    """Tunable constants of the likelihood-ratio detector."""

    alpha0: float = 0.95  # noise-variance smoothing
    beta: float = 0.98  # decision-directed prior-SNR weight
    eta: float = float(np.exp(0.15))  # decision threshold on the mean LLR
    init_frames: int = 10  # 100 ms of assumed non-speech at stream start
    eps_floor: float = EPS_VARIANCE_FLOOR
    corrected: bool = True  # update noise on non-speech frames (the fix)

    def __post_init__(self):
        if not (0.0 < self.alpha0 < 1.0):
            raise ConfigError(f"alpha0 must be in (0,1), got {self.alpha0}")
        if not (0.0 <= self.beta < 1.0):
            raise ConfigError(f"beta must be in [0,1), got {self.beta}")
        if self.eta <= 0.0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.init_frames < 1:
            raise ConfigError(f"init_frames must be >= 1, got {self.init_frames}")


@dataclass
class NoiseEstimate:
    """Per-bin noise variance tracker."""

    gamma_n: np.ndarray
    alpha0: float = 0.95
    eps_floor: float = EPS_VARIANCE_FLOOR


@dataclass
class LrtState:
    """Carry-over between frames: prior-SNR memory and gain proxy."""

    xi_prev: np.ndarray
    gain_prev: np.ndarray  # previous gamma * xi / (1 + xi)
    beta: float = 0.98
    eta: float = float(np.exp(0.15))

    @classmethod
    def fresh(cls, n_bins: int, beta: float, eta: float) -> "LrtState":
        return cls(np.zeros(n_bins), np.zeros(n_bins), beta, eta)


def init_noise_estimate(
    mag: MagSpectrogram,
    init_frames: int = 10,
    alpha0: float = 0.95,
    eps_floor: float = EPS_VARIANCE_FLOOR,
) -> NoiseEstimate:
    """Average the first ``init_frames`` power spectra into a noise estimate."""
    if mag.n_frames < init_frames:
        raise DataError(f"need at least {init_frames} frames to initialize, got {mag.n_frames}")
    power = np.mean(mag.frames[:init_frames] ** 2, axis=0)
    return NoiseEstimate(np.maximum(power, eps_floor), alpha0, eps_floor)


def process_frame(
    frame: np.ndarray, noise: NoiseEstimate, state: LrtState, corrected: bool = True
) -> tuple[int, float, NoiseEstimate, LrtState]:
    """One causal LRT step; returns (decision, score, noise', state')."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != noise.gamma_n.shape:
        raise ConfigError(
            f"frame has {frame.shape[0]} bins but noise estimate has {noise.gamma_n.shape[0]}"
        )
    power = frame * frame
    gamma = power / noise.gamma_n
    xi = state.beta * state.gain_prev + (1.0 - state.beta) * np.maximum(gamma - 1.0, 0.0)
    llr = gamma * xi / (1.0 + xi) - np.log1p(xi)
    score = float(np.mean(llr))
    decision = int(score > np.log(state.eta))

    update = (decision == 0) if corrected else (decision == 1)
    if update:
        gamma_n = noise.alpha0 * noise.gamma_n + (1.0 - noise.alpha0) * power
        gamma_n = np.maximum(gamma_n, noise.eps_floor)
    else:
        gamma_n = noise.gamma_n  # untouched while speech is present

    new_noise = NoiseEstimate(gamma_n, noise.alpha0, noise.eps_floor)
    new_state = LrtState(xi, gamma * xi / (1.0 + xi), state.beta, state.eta)
    return decision, score, new_noise, new_state


@dataclass
class DspVadResult:
    """Per-frame scores (mean LLR) and binary decisions, full stream length."""

    scores: np.ndarray
    decisions: np.ndarray
    init_frames: int
    final_noise: NoiseEstimate | None = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.scores)


def run_dsp_vad(mag: MagSpectrogram, params: DspVadParams | None = None) -> DspVadResult:
    """Run the detector causally over a spectrogram.

    The first ``init_frames`` frames seed the noise estimate and are emitted
    as score 0 / decision 0 (assumed non-speech).
    """
    params = params or DspVadParams()
    if mag.n_frames == 0:
        raise EmptyInputError("cannot run the detector on an empty spectrogram")
    noise = init_noise_estimate(mag, params.init_frames, params.alpha0, params.eps_floor)
    state = LrtState.fresh(mag.frames.shape[1], params.beta, params.eta)
    scores = np.zeros(mag.n_frames)
    decisions = np.zeros(mag.n_frames, dtype=np.int8)
    for i in range(params.init_frames, mag.n_frames):
        decision, score, noise, state = process_frame(
            mag.frames[i], noise, state, params.corrected
        )
        scores[i] = score
        decisions[i] = decision
    return DspVadResult(scores, decisions, params.init_frames, noise)
