"""Clip assembly rules and corpus construction."""

import numpy as np
import pytest

from bcvad.audio import AudioBuffer
from bcvad.corpus import (
    CorpusConfig,
    assemble_clips,
    assemble_speech,
    build_corpus,
    class_range,
    fraction_in_class,
    load_corpus_config,
    load_split_data,
    materialize_clip,
    plan_corpus,
)
from bcvad.errors import AssemblyError, ConfigError, DataError
from bcvad.features import BC_FEATURES, stft_magnitude
from bcvad.labels import LabelTrack, generate_labels
from bcvad.storage import load_manifest
from bcvad.synth import SynthProfile, synth_speech_pair

CFG = BC_FEATURES.spectrogram
FS = 16000


def speech_recording(seed, duration_s=20.0, pause_density=0.5):
    air, _ = synth_speech_pair(
        duration_s, SynthProfile("target_speech", seed=seed, pause_density=pause_density)
    )
    return air, generate_labels(stft_magnitude(air, CFG))


def silence_recording(duration_s=20.0):
    audio = AudioBuffer(np.zeros(int(duration_s * FS)))
    n = CFG.frame_count(len(audio))
    return audio, LabelTrack(np.zeros(n), CFG.hop_s)


class TestAssembleClips:
    def test_exact_length_and_lockstep_labels(self):
        recordings = [speech_recording(s) for s in (1, 2)]
        clip = assemble_clips(recordings, "medium", clip_len_s=10.0, seed=0)
        assert len(clip.audio) == 10 * FS
        assert len(clip.labels) == CFG.frame_count(len(clip.audio))

    def test_all_silence_sources_satisfy_low(self):
        clip = assemble_clips([silence_recording()], "low", clip_len_s=10.0, seed=0)
        assert clip.speech_fraction == 0.0
        assert fraction_in_class(clip.speech_fraction, "low")

    def test_high_class_fraction_verified_by_recount(self):
        recordings = [speech_recording(s, pause_density=0.2) for s in (3, 4)]
        clip = assemble_clips(recordings, "high", clip_len_s=10.0, seed=1)
        recount = float(np.mean(clip.labels.values >= 0.5))
        assert recount > 0.60
        assert recount == pytest.approx(clip.speech_fraction)

    def test_no_crop_boundary_on_speech_frame(self):
        recordings = [speech_recording(s, pause_density=0.35) for s in (5, 6)]
        clip = assemble_clips(recordings, "medium", clip_len_s=10.0, seed=2)
        for crop in clip.crops:
            labels = recordings[crop.recording][1].values
            assert labels[crop.start_frame] == 0.0
            assert labels[crop.start_frame + crop.n_frames - 1] == 0.0

    def test_unreachable_class_fails_after_attempts(self):
        with pytest.raises(AssemblyError):
            assemble_clips([silence_recording()], "high", clip_len_s=5.0, seed=0, max_attempts=25)

    def test_insufficient_source_material_rejected(self):
        with pytest.raises(DataError):
            assemble_clips([speech_recording(7, duration_s=4.0)], "medium", clip_len_s=10.0)

    def test_deterministic_per_seed(self):
        recordings = [speech_recording(s) for s in (8, 9)]
        c1 = assemble_clips(recordings, "medium", clip_len_s=10.0, seed=5)
        c2 = assemble_clips(recordings, "medium", clip_len_s=10.0, seed=5)
        np.testing.assert_array_equal(c1.audio.samples, c2.audio.samples)
        np.testing.assert_array_equal(c1.labels.values, c2.labels.values)


class TestClassRules:
    def test_boundaries(self):
        assert fraction_in_class(0.10, "low")
        assert not fraction_in_class(0.25, "low")
        assert fraction_in_class(0.25, "medium")
        assert fraction_in_class(0.60, "medium")
        assert not fraction_in_class(0.60, "high")
        assert fraction_in_class(0.61, "high")

    def test_unknown_class_rejected(self):
        with pytest.raises(ConfigError):
            class_range("extreme")


class TestPlanCorpus:
    def test_balanced_thirds(self):
        config = CorpusConfig(train_clips=30, test_clips=6, seed=0)
        records = plan_corpus(config)
        train = [r for r in records if r.split == "train"]
        for cls in ("low", "medium", "high"):
            assert sum(1 for r in train if r.content_class == cls) == 10

    def test_speaker_seeds_disjoint_across_splits(self):
        records = plan_corpus(CorpusConfig(train_clips=48, test_clips=12, seed=3))
        train_seeds = {r.speaker_seed for r in records if r.split == "train"}
        test_seeds = {r.speaker_seed for r in records if r.split == "test"}
        assert train_seeds.isdisjoint(test_seeds)
        assert len(train_seeds) == 16
        assert len(test_seeds) == 4

    def test_snr_draws_follow_configured_normal(self):
        config = CorpusConfig(train_clips=999, test_clips=3, seed=11)
        records = plan_corpus(config)
        snrs = np.array([r.snr_db for r in records if r.split == "train"])
        assert snrs.mean() == pytest.approx(15.0, abs=1.0)
        assert snrs.std() == pytest.approx(5.0, abs=1.0)

    def test_unbalanced_count_rejected(self):
        with pytest.raises(ConfigError):
            CorpusConfig(train_clips=31, test_clips=6)

    def test_air_preset(self):
        config = CorpusConfig.air_defaults(train_clips=6, test_clips=3)
        assert config.signal == "air"
        assert config.snr_mean_db == 5.0
        assert config.snr_sd_db == 10.0
        assert config.features.n_mels == 64


MINI = CorpusConfig(
    train_clips=3,
    test_clips=3,
    train_speakers=2,
    test_speakers=1,
    clip_len_s=8.0,
    sources_per_clip=1,
    source_duration_s=12.0,
    seed=21,
)


class TestMaterialize:
    def test_clip_chain_shapes(self):
        records = plan_corpus(MINI)
        clip = materialize_clip(records[0], MINI)
        n_frames = CFG.frame_count(int(MINI.clip_len_s * FS))
        assert clip.features.frames.shape == (n_frames, 32)
        assert len(clip.soft_labels) == n_frames
        assert 0.0 <= clip.soft_labels.values.min() <= clip.soft_labels.values.max() <= 1.0

    def test_regeneration_is_bit_identical(self):
        records = plan_corpus(MINI)
        c1 = materialize_clip(records[1], MINI)
        c2 = materialize_clip(records[1], MINI)
        np.testing.assert_array_equal(c1.features.frames, c2.features.frames)
        np.testing.assert_array_equal(c1.mixture.samples, c2.mixture.samples)

    def test_assemble_speech_matches_clip_class(self):
        records = plan_corpus(MINI)
        for record in records[:3]:
            assembled = assemble_speech(record, MINI)
            if record.content_class == "low":
                assert MINI.min_low_fraction <= assembled.speech_fraction < 0.25
            else:
                assert fraction_in_class(assembled.speech_fraction, record.content_class)


class TestAirChain:
    def test_air_clip_uses_wideband_features_and_noise_only(self):
        config = CorpusConfig.air_defaults(
            train_clips=3,
            test_clips=3,
            train_speakers=2,
            test_speakers=1,
            clip_len_s=8.0,
            sources_per_clip=1,
            source_duration_s=12.0,
            seed=31,
        )
        records = plan_corpus(config)
        clip = materialize_clip(records[0], config)
        n_frames = CFG.frame_count(int(config.clip_len_s * FS))
        assert clip.features.frames.shape == (n_frames, 64)
        # air chain: interference is the noise bed alone, no competing talker
        from bcvad.corpus import make_interference
        from bcvad.synth import SynthProfile, synth_noise

        interference = make_interference(records[0], config)
        bed = synth_noise(
            config.clip_len_s,
            SynthProfile(kind=records[0].noise_kind, seed=records[0].noise_seed),
        )
        np.testing.assert_array_equal(interference.samples, bed.samples)


class TestBuildCorpus:
    def test_corpus_on_disk(self, tmp_path):
        out = tmp_path / "corpus"
        records = build_corpus(MINI, out)
        assert (out / "corpus.json").exists()
        manifest = load_manifest(out / "manifest.jsonl")
        assert len(manifest) == 6
        for record in manifest:
            assert (out / record.feature_file).exists()
            assert (out / record.label_file).exists()
            assert record.n_frames == CFG.frame_count(int(MINI.clip_len_s * FS))
        assert load_corpus_config(out) == MINI
        data = load_split_data(out, manifest)
        assert len(data.train) == 3
        assert len(data.test) == 3
        assert data.train[0][0].shape == (manifest[0].n_frames, 32)

    def test_rebuild_identical(self, tmp_path):
        out1, out2 = tmp_path / "c1", tmp_path / "c2"
        build_corpus(MINI, out1)
        build_corpus(MINI, out2)
        assert (out1 / "manifest.jsonl").read_bytes() == (out2 / "manifest.jsonl").read_bytes()
        for rel in ("features/train-0000.bin", "labels/test-0002.bin"):
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes()
