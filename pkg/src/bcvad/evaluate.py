"""Detector handles and per-condition evaluation sweeps over the test split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, mix_at_snr, rescale_to_dbfs
from .corpus import CorpusConfig, assemble_speech, load_corpus_config, make_interference
from .dsp_vad import DspVadParams, run_dsp_vad
from .errors import ConfigError, DataError
from .features import AIR_FEATURES, BC_FEATURES, FeatureConfig, compute_log_mel, stft_magnitude
from .labels import binarize, smooth_labels
from .metrics import EvalReport, score_condition
from .model import VadModel, forward_sequence, load_model, quantize_weights
from .storage import ClipRecord
from .synth import SynthProfile, synth_noise

DEFAULT_SNR_SWEEP = (-5.0, 0.0, 5.0, 10.0, 15.0)
DEFAULT_NOISE_TYPES = ("white", "pink", "babble", "clean")

# Mixtures are normalized to a fixed level before scoring, so conditions
# differ only in noise type and SNR.
EVAL_LEVEL_DBFS = -28.0

_EVAL_NOISE_KINDS = {"white": "white_noise", "pink": "pink_noise", "babble": "babble"}
_NOISE_CODES = {"white": 1, "pink": 2, "babble": 3}


class DspDetector:
    """Likelihood-ratio detector handle operating on magnitude spectra."""

    def __init__(self, params: DspVadParams | None = None, feat: FeatureConfig = BC_FEATURES):
        self.params = params or DspVadParams()
        self.feat = feat
        self.name = "dsp"

    def run(self, audio: AudioBuffer) -> tuple[np.ndarray, np.ndarray]:
        result = run_dsp_vad(stft_magnitude(audio, self.feat.spectrogram), self.params)
        return result.scores, result.decisions


class NeuralDetector:
    """Conv-GRU detector handle; features are chosen to match the model."""

    def __init__(self, model: VadModel, name: str | None = None, threshold: float = 0.5):
        self.model = model
        self.threshold = threshold
        self.feat = feature_config_for(model)
        self.name = name or f"neural-{'int8' if model.precision == 'int8' else 'float'}"

    def run(self, audio: AudioBuffer) -> tuple[np.ndarray, np.ndarray]:
        features = compute_log_mel(audio, self.feat).frames.astype(np.float32)
        probs = forward_sequence(self.model, features)
        return probs, (probs > self.threshold).astype(np.int8)


def feature_config_for(model: VadModel) -> FeatureConfig:
    """Front-end configuration matching a model's input width."""
    for feat in (BC_FEATURES, AIR_FEATURES):
        if feat.n_mels == model.arch.input_bins:
            return feat
    raise ConfigError(
        f"no feature preset with {model.arch.input_bins} bins; expected 32 (bc) or 64 (air)"
    )


def make_detector(kind: str, weights_path=None, dsp_params: DspVadParams | None = None):
    """Build a detector handle from a CLI-style selection."""
    if kind == "dsp":
        return DspDetector(dsp_params)
    if kind not in ("neural-float", "neural-int8"):
        raise ConfigError(f"unknown detector kind {kind!r}")
    if weights_path is None:
        raise ConfigError(f"detector {kind!r} needs a weight file")
    model = load_model(weights_path)
    if kind == "neural-float":
        if model.precision != "float32":
            raise ConfigError("neural-float needs a float weight file, got int8")
        return NeuralDetector(model, "neural-float")
    if model.precision != "int8":
        model = quantize_weights(model)
    return NeuralDetector(model, "neural-int8")


@dataclass
class _TestClip:
    record: ClipRecord
    clean: AudioBuffer
    labels: np.ndarray  # raw binary, lockstep with frames
    truth: np.ndarray  # binarized ground truth for scoring


def _prepare_test_clips(
    records: list[ClipRecord], config: CorpusConfig, truth_mode: str
) -> list[_TestClip]:
    clips = []
    for record in records:
        assembled = assemble_speech(record, config)
        air, bc = assembled.audios
        clean = bc if config.signal == "bc" else air
        if truth_mode == "smoothed":
            truth = binarize(smooth_labels(assembled.labels))
        elif truth_mode == "raw":
            truth = binarize(assembled.labels)
        else:
            raise ConfigError(f"truth must be 'smoothed' or 'raw', got {truth_mode!r}")
        clips.append(_TestClip(record, clean, assembled.labels.values, truth.astype(bool)))
    return clips


def _condition_noise(
    clip: _TestClip, config: CorpusConfig, noise_type: str, seed: int
) -> AudioBuffer:
    # one noise realization per (clip, type, eval seed); SNRs reuse it with
    # different gains, as in any remixing sweep
    rng = np.random.default_rng([clip.record.noise_seed, _NOISE_CODES[noise_type], seed])
    profile = SynthProfile(kind=_EVAL_NOISE_KINDS[noise_type], seed=int(rng.integers(0, 2**62)))
    return synth_noise(config.clip_len_s, profile)


def evaluate_detectors(
    detectors: list,
    corpus_dir,
    records: list[ClipRecord],
    snr_list=DEFAULT_SNR_SWEEP,
    noise_types=DEFAULT_NOISE_TYPES,
    seed: int = 0,
    truth_mode: str = "smoothed",
    progress=None,
) -> list[EvalReport]:
    """Remix the test split per condition and score every detector on it.

    Each mixture is synthesized once and fed to all detectors, so comparing
    detectors costs little more than evaluating one.  The clean condition
    appears once with SNR recorded as NaN; every other (noise type, SNR)
    pair gets one report row in sweep order.
    """
    config = load_corpus_config(corpus_dir)
    test_records = [r for r in records if r.split == "test"]
    if not test_records:
        raise DataError("manifest has no test clips")
    clips = _prepare_test_clips(test_records, config, truth_mode)

    conditions: list[tuple[str, float]] = []
    for noise_type in noise_types:
        if noise_type == "clean":
            conditions.append(("clean", float("nan")))
        elif noise_type == "native" or noise_type in _EVAL_NOISE_KINDS:
            conditions.extend((noise_type, snr) for snr in snr_list)
        else:
            raise ConfigError(f"unknown noise type {noise_type!r}")

    reports = [EvalReport(d.name) for d in detectors]
    noise_cache: dict[tuple[str, str], AudioBuffer] = {}
    for i, (noise_type, snr_db) in enumerate(conditions):
        pooled = [([], []) for _ in detectors]  # (scores, decisions) per detector
        truths = []
        for clip in clips:
            if noise_type == "clean":
                mixture = clip.clean
            else:
                key = (clip.record.clip_id, noise_type)
                if key not in noise_cache:
                    if noise_type == "native":
                        # the clip's own manifest interference (noise bed +
                        # competing talker), remixed at the sweep SNR
                        noise_cache[key] = make_interference(clip.record, config)
                    else:
                        noise_cache[key] = _condition_noise(clip, config, noise_type, seed)
                mixture, _ = mix_at_snr(
                    clip.clean,
                    clip.labels,
                    noise_cache[key],
                    snr_db,
                    frame_len=config.features.spectrogram.frame_len,
                    hop=config.features.spectrogram.hop,
                )
            leveled, _ = rescale_to_dbfs(mixture, EVAL_LEVEL_DBFS)
            for d, detector in enumerate(detectors):
                clip_scores, clip_decisions = detector.run(leveled)
                pooled[d][0].append(clip_scores)
                pooled[d][1].append(clip_decisions)
            truths.append(clip.truth)
        truth_all = np.concatenate(truths)
        for d, report in enumerate(reports):
            row = score_condition(
                noise_type,
                snr_db,
                np.concatenate(pooled[d][0]),
                np.concatenate(pooled[d][1]),
                truth_all,
            )
            report.rows.append(row)
            if progress is not None:
                progress(i + 1, len(conditions), row)
    return reports


def evaluate_detector(
    detector,
    corpus_dir,
    records: list[ClipRecord],
    snr_list=DEFAULT_SNR_SWEEP,
    noise_types=DEFAULT_NOISE_TYPES,
    seed: int = 0,
    truth_mode: str = "smoothed",
    progress=None,
) -> EvalReport:
    """Single-detector convenience wrapper around :func:`evaluate_detectors`."""
    return evaluate_detectors(
        [detector], corpus_dir, records, snr_list, noise_types, seed, truth_mode, progress
    )[0]


def dcf_versus_snr_table(reports: list[EvalReport], noise_type: str = "babble") -> str:
    """Plain-text table of DCF% per SNR for several detectors on one noise type."""
    snrs = sorted(
        {r.snr_db for rep in reports for r in rep.rows
         if r.noise_type == noise_type and not np.isnan(r.snr_db)}
    )
    header = ["snr_db"] + [rep.detector for rep in reports]
    lines = [f"# DCF% on {noise_type} noise", "\t".join(header)]
    for snr in snrs:
        cells = [f"{snr:+.0f}"]
        for rep in reports:
            match = [r for r in rep.rows if r.noise_type == noise_type and r.snr_db == snr]
            cells.append(f"{match[0].dcf_pct:.2f}" if match else "-")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
