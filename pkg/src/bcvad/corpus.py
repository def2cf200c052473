"""Clip assembly and corpus synthesis.

Source recordings are cropped only at non-speech frames and concatenated into
fixed-length clips whose speech content falls in a requested class (low,
medium, high).  The corpus builder draws per-clip speakers, SNRs and levels,
materializes log-Mel features plus smoothed targets to disk, and records every
seed in the manifest so any clip can be regenerated bit-identically (eval
sweeps remix the same speech under different noise conditions).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, mix_at_snr, rescale_to_dbfs, rms
from .errors import AssemblyError, ConfigError, DataError
from .features import (
    AIR_FEATURES,
    BC_FEATURES,
    FeatureConfig,
    LogMelFrames,
    compute_log_mel,
    stft_magnitude,
)
from .labels import LabelTrack, generate_labels, smooth_labels
from .storage import ClipRecord, config_hash, load_array, save_array, save_manifest
from .synth import NOISE_KINDS, SynthProfile, synth_distractor, synth_noise, synth_speech_pair
from .training import SplitData

CONTENT_CLASSES = ("low", "medium", "high")

# Raw-label speech fraction per class: low < 25%, medium 25-60%, high > 60%.
def class_range(content_class: str) -> tuple[float, float]:
    if content_class == "low":
        return (0.0, 0.25)
    if content_class == "medium":
        return (0.25, 0.60)
    if content_class == "high":
        return (0.60, 1.0)
    raise ConfigError(f"unknown content class {content_class!r}")


def fraction_in_class(fraction: float, content_class: str) -> bool:
    lo, hi = class_range(content_class)
    if content_class == "medium":
        return lo <= fraction <= hi
    if content_class == "low":
        return fraction < hi
    return fraction > lo


# Pause density used when synthesizing sources aimed at each class.
_CLASS_PAUSE_DENSITY = {"low": 0.85, "medium": 0.5, "high": 0.18}


@dataclass
class CropEntry:
    """Provenance of one crop: recording index and frame window."""

    recording: int
    start_frame: int
    n_frames: int


@dataclass
class AssembledClip:
    """Fixed-length clip built from silent-boundary crops."""

    audios: tuple[AudioBuffer, ...]
    labels: LabelTrack
    crops: list[CropEntry]
    speech_fraction: float
    attempts: int

    @property
    def audio(self) -> AudioBuffer:
        return self.audios[0]


def assemble_parallel_clips(
    recordings: list[tuple[tuple[AudioBuffer, ...], LabelTrack]],
    target_class: str,
    clip_len_s: float = 30.0,
    seed: int = 0,
    max_attempts: int = 1000,
    fraction_range: tuple[float, float] | None = None,
    feat: FeatureConfig = BC_FEATURES,
) -> AssembledClip:
    """Assemble parallel audio channels cropped in lockstep with their labels.

    Crop boundaries land only on frames labeled 0, so no speech run is cut.
    Whole assemblies are resampled until the clip's raw speech fraction falls
    in the target class range (or an explicit ``fraction_range``).
    """
    cfg = feat.spectrogram
    n_channels = len(recordings[0][0])
    frames_needed = cfg.frame_count(int(round(clip_len_s * cfg.sample_rate)))
    total_available = sum(len(lab) for _, lab in recordings)
    if total_available < frames_needed:
        raise DataError(
            f"sources provide {total_available} frames, clip needs {frames_needed}"
        )
    for audios, lab in recordings:
        if len(audios) != n_channels:
            raise ConfigError("all recordings must carry the same channel count")
        if any(cfg.frame_count(len(a)) < len(lab) for a in audios):
            raise ConfigError("label track longer than its recording")

    speech_mask = [lab.values >= 0.5 for _, lab in recordings]
    rng = np.random.default_rng(seed)
    class_range(target_class)  # validate the class name even with an override

    for attempt in range(1, max_attempts + 1):
        crops: list[CropEntry] = []
        total = 0
        dead_end = False
        while total < frames_needed:
            remaining = frames_needed - total
            placed = False
            for _ in range(16):  # retries for a feasible (recording, length) pair
                rec_idx = int(rng.integers(len(recordings)))
                zeros = ~speech_mask[rec_idx]
                n_src = zeros.shape[0]
                max_len = min(remaining, n_src)
                if max_len < 1:
                    continue
                min_len = min(150, max_len)  # prefer crops of at least ~1.5 s
                n_f = int(rng.integers(min_len, max_len + 1))
                valid = zeros[: n_src - n_f + 1] & zeros[n_f - 1 :]
                starts = np.flatnonzero(valid)
                if starts.size:
                    start = int(rng.choice(starts))
                    crops.append(CropEntry(rec_idx, start, n_f))
                    total += n_f
                    placed = True
                    break
            if not placed:
                dead_end = True
                break
        if dead_end:
            continue
        label_values = np.concatenate(
            [recordings[c.recording][1].values[c.start_frame : c.start_frame + c.n_frames]
             for c in crops]
        )
        fraction = float(np.mean(label_values >= 0.5))
        if fraction_range is not None:
            ok = fraction_range[0] <= fraction <= fraction_range[1]
        else:
            ok = fraction_in_class(fraction, target_class)
        if not ok:
            continue

        hop, tail = cfg.hop, cfg.frame_len - cfg.hop
        audios = []
        for ch in range(n_channels):
            pieces = [
                recordings[c.recording][0][ch].samples[c.start_frame * hop : (c.start_frame + c.n_frames) * hop]
                for c in crops
            ]
            last = crops[-1]
            tail_start = (last.start_frame + last.n_frames) * hop
            pieces.append(
                recordings[last.recording][0][ch].samples[tail_start : tail_start + tail]
            )
            audios.append(AudioBuffer(np.concatenate(pieces), cfg.sample_rate))
        return AssembledClip(
            tuple(audios), LabelTrack(label_values, cfg.hop_s), crops, fraction, attempt
        )
    raise AssemblyError(
        f"could not reach class {target_class!r} in {max_attempts} attempts"
    )


def assemble_clips(
    recordings: list[tuple[AudioBuffer, LabelTrack]],
    target_class: str,
    clip_len_s: float = 30.0,
    seed: int = 0,
    max_attempts: int = 1000,
    fraction_range: tuple[float, float] | None = None,
    feat: FeatureConfig = BC_FEATURES,
) -> AssembledClip:
    """Single-channel clip assembly; see :func:`assemble_parallel_clips`."""
    wrapped = [((audio,), labels) for audio, labels in recordings]
    return assemble_parallel_clips(
        wrapped, target_class, clip_len_s, seed, max_attempts, fraction_range, feat
    )


@dataclass(frozen=True)
class CorpusConfig:
    """Synthesis plan for one corpus."""

    signal: str = "bc"  # which channel feeds the detector: "bc" or "air"
    train_clips: int = 240
    test_clips: int = 42
    train_speakers: int = 16
    test_speakers: int = 4
    clip_len_s: float = 30.0
    snr_mean_db: float = 15.0
    snr_sd_db: float = 5.0
    level_mean_dbfs: float = -28.0
    level_sd_dbfs: float = 10.0
    seed: int = 0
    sources_per_clip: int = 2
    source_duration_s: float = 24.0
    min_low_fraction: float = 0.04  # keeps SNR defined on low-content clips

    def __post_init__(self):
        if self.signal not in ("bc", "air"):
            raise ConfigError(f"signal must be 'bc' or 'air', got {self.signal!r}")
        if self.train_clips % 3 or self.test_clips % 3:
            raise ConfigError("clip counts must be divisible by 3 for class balance")
        if self.train_clips <= 0 or self.test_clips <= 0:
            raise ConfigError("clip counts must be positive")
        if self.train_speakers <= 0 or self.test_speakers <= 0:
            raise ConfigError("speaker counts must be positive")

    @property
    def features(self) -> FeatureConfig:
        return BC_FEATURES if self.signal == "bc" else AIR_FEATURES

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def air_defaults(cls, **overrides) -> "CorpusConfig":
        """Air-conduction preset: wider band features, lower-SNR mixing."""
        values = dict(signal="air", snr_mean_db=5.0, snr_sd_db=10.0)
        values.update(overrides)
        return cls(**values)


def _speaker_pitch_range(speaker_seed: int) -> tuple[float, float]:
    rng = np.random.default_rng([speaker_seed, 17])
    lo = float(rng.uniform(90.0, 250.0))
    return (lo, lo + float(rng.uniform(40.0, 110.0)))


def plan_corpus(config: CorpusConfig) -> list[ClipRecord]:
    """Draw every per-clip seed, class, SNR and level; no audio is generated."""
    rng = np.random.default_rng(config.seed)
    n_speakers = config.train_speakers + config.test_speakers
    speaker_seeds = [int(s) for s in rng.integers(0, 2**62, size=n_speakers)]
    if len(set(speaker_seeds)) != n_speakers:
        raise ConfigError("speaker seed collision; pick another master seed")
    train_pool = speaker_seeds[: config.train_speakers]
    test_pool = speaker_seeds[config.train_speakers :]

    records = []
    for split, count, pool in (
        ("train", config.train_clips, train_pool),
        ("test", config.test_clips, test_pool),
    ):
        for i in range(count):
            records.append(
                ClipRecord(
                    clip_id=f"{split}-{i:04d}",
                    split=split,
                    content_class=CONTENT_CLASSES[i % 3],
                    speaker_seed=pool[i % len(pool)],
                    content_seed=int(rng.integers(0, 2**62)),
                    assembly_seed=int(rng.integers(0, 2**62)),
                    noise_kind=NOISE_KINDS[i % len(NOISE_KINDS)],
                    noise_seed=int(rng.integers(0, 2**62)),
                    distractor_seed=int(rng.integers(0, 2**62)),
                    snr_db=float(rng.normal(config.snr_mean_db, config.snr_sd_db)),
                    level_dbfs=float(rng.normal(config.level_mean_dbfs, config.level_sd_dbfs)),
                )
            )
    return records


def assemble_speech(record: ClipRecord, config: CorpusConfig) -> AssembledClip:
    """Regenerate a clip's assembled (air, bc) speech and lockstep labels."""
    feat = config.features
    recordings = []
    for i in range(config.sources_per_clip):
        profile = SynthProfile(
            kind="target_speech",
            pitch_range=_speaker_pitch_range(record.speaker_seed),
            pause_density=_CLASS_PAUSE_DENSITY[record.content_class],
            seed=(record.content_seed + i) % 2**63,
            speaker_seed=record.speaker_seed,
        )
        air, bc = synth_speech_pair(config.source_duration_s, profile)
        labels = generate_labels(stft_magnitude(air, feat.spectrogram))
        recordings.append(((air, bc), labels))
    fraction_range = None
    if record.content_class == "low":
        fraction_range = (config.min_low_fraction, class_range("low")[1] - 1e-9)
    return assemble_parallel_clips(
        recordings,
        record.content_class,
        config.clip_len_s,
        seed=record.assembly_seed,
        fraction_range=fraction_range,
        feat=feat,
    )


def make_interference(
    record: ClipRecord,
    config: CorpusConfig,
    noise_kind: str | None = None,
    noise_seed: int | None = None,
) -> AudioBuffer:
    """Interference term: a noise bed, plus a competing talker on the BC chain."""
    kind = noise_kind or record.noise_kind
    seed = record.noise_seed if noise_seed is None else noise_seed
    noise = synth_noise(config.clip_len_s, SynthProfile(kind=kind, seed=seed))
    if config.signal != "bc":
        return noise
    distractor = synth_distractor(config.clip_len_s, record.distractor_seed)
    d_rms = rms(distractor.samples)
    if d_rms == 0.0:
        return noise
    scaled = distractor.samples * (rms(noise.samples) / d_rms)
    return AudioBuffer(noise.samples + scaled, noise.sample_rate)


@dataclass
class ClipData:
    """Fully materialized clip: features, targets and intermediate signals."""

    record: ClipRecord
    features: LogMelFrames
    soft_labels: LabelTrack
    raw_labels: LabelTrack
    mixture: AudioBuffer
    clean: AudioBuffer | None = field(repr=False, default=None)


def materialize_clip(record: ClipRecord, config: CorpusConfig) -> ClipData:
    """Run the full signal chain for one manifest record."""
    assembled = assemble_speech(record, config)
    air, bc = assembled.audios
    clean = bc if config.signal == "bc" else air
    interference = make_interference(record, config)
    mixed, _ = mix_at_snr(
        clean,
        assembled.labels.values,
        interference,
        record.snr_db,
        frame_len=config.features.spectrogram.frame_len,
        hop=config.features.spectrogram.hop,
    )
    leveled, _ = rescale_to_dbfs(mixed, record.level_dbfs)
    features = compute_log_mel(leveled, config.features)
    soft = smooth_labels(assembled.labels)
    return ClipData(record, features, soft, assembled.labels, leveled, clean)


def build_corpus(config: CorpusConfig, out_dir, progress=None) -> list[ClipRecord]:
    """Materialize a corpus to disk and return the manifest records.

    Layout: corpus.json (config + hash), manifest.jsonl, features/<id>.bin
    (float32 T x n_mels), labels/<id>.bin (float32 soft targets).
    """
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    records = plan_corpus(config)
    digest = config_hash(config.to_dict())
    for n, record in enumerate(records):
        clip = materialize_clip(record, config)
        record.n_frames = clip.features.frames.shape[0]
        record.speech_fraction = float(np.mean(clip.raw_labels.values >= 0.5))
        record.feature_file = f"features/{record.clip_id}.bin"
        record.label_file = f"labels/{record.clip_id}.bin"
        save_array(out / record.feature_file, clip.features.frames.astype(np.float32), digest)
        save_array(out / record.label_file, clip.soft_labels.values.astype(np.float32), digest)
        if progress is not None:
            progress(n + 1, len(records), record)
    save_manifest(out / "manifest.jsonl", records)
    with open(out / "corpus.json", "w", encoding="ascii") as fh:
        json.dump({"config": config.to_dict(), "config_hash": digest}, fh, indent=2)
        fh.write("\n")
    return records


def load_corpus_config(corpus_dir) -> CorpusConfig:
    path = Path(corpus_dir) / "corpus.json"
    if not path.exists():
        raise DataError(f"no corpus.json under {corpus_dir}")
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    return CorpusConfig(**payload["config"])


def load_split_data(corpus_dir, manifest: list[ClipRecord]) -> SplitData:
    """Load materialized features and soft targets for training."""
    out = Path(corpus_dir)
    train, test = [], []
    for record in manifest:
        feats, _ = load_array(out / record.feature_file)
        labels, _ = load_array(out / record.label_file)
        item = (feats.astype(np.float32), labels.astype(np.float32))
        (train if record.split == "train" else test).append(item)
    if not train or not test:
        raise DataError("corpus is missing a train or test split")
    return SplitData(train=train, test=test)
