"""CLI surface: commands, config merging, exit codes, output formats."""

import hashlib
import re

import numpy as np
import pytest

from bcvad.audio import AudioBuffer, save_wav
from bcvad.cli import main, read_config_file
from bcvad.errors import ConfigError
from bcvad.synth import SynthProfile, synth_noise, synth_speech_pair
from bcvad.training import load_history

SYNTH_ARGS = [
    "synth",
    "--train-clips", "3",
    "--test-clips", "3",
    "--train-speakers", "2",
    "--test-speakers", "1",
    "--clip-len-s", "6",
    "--seed", "5",
]


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "corpus"
    assert main(SYNTH_ARGS + ["--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def cli_weights(cli_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "run"
    code = main([
        "train", "--corpus", str(cli_corpus), "--out", str(out), "--seed", "1",
        "--steps-per-epoch", "2", "--batch-size", "2", "--max-epochs", "2",
    ])
    assert code == 0
    return out / "bcvad-bc.weights"


class TestSynth:
    def test_summary_reports_balance_and_disjoint_speakers(self, cli_corpus, capsys):
        code = main(SYNTH_ARGS + ["--out", str(cli_corpus.parent / "again")])
        out = capsys.readouterr().out
        assert code == 0
        assert "1/1/1 low/medium/high" in out
        assert "speaker seeds disjoint across splits: True" in out

    def test_same_seed_same_manifest_hash(self, cli_corpus, tmp_path):
        other = tmp_path / "rerun"
        assert main(SYNTH_ARGS + ["--out", str(other)]) == 0
        h1 = hashlib.sha256((cli_corpus / "manifest.jsonl").read_bytes()).hexdigest()
        h2 = hashlib.sha256((other / "manifest.jsonl").read_bytes()).hexdigest()
        assert h1 == h2

    def test_missing_seed_is_config_error(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path / "x")]) == 2


class TestTrain:
    def test_outputs_exist(self, cli_weights):
        assert cli_weights.exists()
        history = load_history(cli_weights.parent / "history.csv")
        assert len(history) == 2  # one line per epoch run

    def test_missing_corpus_is_data_error(self, tmp_path):
        code = main([
            "train", "--corpus", str(tmp_path / "nope"), "--out", str(tmp_path / "o"),
            "--seed", "1",
        ])
        assert code == 3


class TestEval:
    def test_dsp_report_written_and_reproducible(self, cli_corpus, tmp_path):
        out1, out2 = tmp_path / "e1", tmp_path / "e2"
        args = [
            "eval", "--corpus", str(cli_corpus), "--detector", "dsp",
            "--snr-list", "15", "--noise-types", "white,clean", "--seed", "7",
        ]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        report1 = (out1 / "report-dsp.csv").read_bytes()
        report2 = (out2 / "report-dsp.csv").read_bytes()
        assert report1 == report2
        text = report1.decode()
        assert text.splitlines()[0].startswith("condition,snr_db,mr,far,dcf_pct")
        clean_row = [ln for ln in text.splitlines() if ln.startswith("clean,")][0]
        assert clean_row.split(",")[1] == ""  # SNR not applicable

    def test_neural_detectors_and_table(self, cli_corpus, cli_weights, tmp_path, capsys):
        out = tmp_path / "e3"
        code = main([
            "eval", "--corpus", str(cli_corpus), "--detector", "dsp,neural-float,neural-int8",
            "--weights", str(cli_weights), "--snr-list", "15", "--noise-types", "babble",
            "--seed", "7", "--out", str(out),
        ])
        assert code == 0
        stdout = capsys.readouterr().out
        assert (out / "report-neural-float.csv").exists()
        assert (out / "report-neural-int8.csv").exists()
        table = (out / "dcf_table.txt").read_text()
        assert table.splitlines()[1].split("\t") == ["snr_db", "dsp", "neural-float", "neural-int8"]
        assert "DCF%" in stdout


class TestStream:
    def test_one_second_gives_99_lines(self, cli_weights, tmp_path, capsys):
        rng = np.random.default_rng(0)
        wav = tmp_path / "in.wav"
        save_wav(wav, AudioBuffer(0.1 * rng.standard_normal(16000)))
        code = main(["stream", "--wav", str(wav), "--weights", str(cli_weights)])
        out = capsys.readouterr().out
        assert code == 0
        lines = [ln for ln in out.splitlines() if ln and not ln.startswith("#")]
        assert len(lines) == 99
        first = lines[0].split()
        assert first[0] == "0" and first[3] in ("0", "1")
        assert any(ln.startswith("# mean_ms=") for ln in out.splitlines())

    def test_stream_matches_batch_pipeline(self, cli_weights, tmp_path, capsys):
        speech, _ = synth_speech_pair(2.0, SynthProfile("target_speech", seed=3))
        wav = tmp_path / "speech.wav"
        save_wav(wav, speech)
        assert main(["stream", "--wav", str(wav), "--weights", str(cli_weights)]) == 0
        out = capsys.readouterr().out
        probs = np.array(
            [float(ln.split()[2]) for ln in out.splitlines() if ln and not ln.startswith("#")]
        )
        from bcvad.audio import load_wav
        from bcvad.evaluate import NeuralDetector
        from bcvad.model import load_model

        batch_probs, _ = NeuralDetector(load_model(cli_weights)).run(load_wav(wav))
        np.testing.assert_allclose(probs, batch_probs, atol=1e-5)

    def test_dsp_stream_needs_no_weights(self, tmp_path, capsys):
        noise = synth_noise(1.0, SynthProfile("white_noise", seed=1))
        wav = tmp_path / "n.wav"
        save_wav(wav, noise)
        assert main(["stream", "--wav", str(wav), "--detector", "dsp"]) == 0
        assert len(capsys.readouterr().out.splitlines()) >= 99

    def test_malformed_wav_is_format_error(self, tmp_path):
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"RIFFnotawav")
        assert main(["stream", "--wav", str(bad), "--detector", "dsp"]) == 4

    def test_wrong_sample_rate_rejected(self, tmp_path):
        wav = tmp_path / "8k.wav"
        save_wav(wav, AudioBuffer(np.zeros(8000), sample_rate=8000))
        assert main(["stream", "--wav", str(wav), "--detector", "dsp"]) == 4


class TestQuantizeAndBench:
    def test_quantize_shrinks_file(self, cli_weights, tmp_path, capsys):
        out = tmp_path / "q"
        assert main(["quantize", "--weights", str(cli_weights), "--out", str(out)]) == 0
        int8_path = out / "bcvad-bc.int8.weights"
        assert int8_path.exists()
        assert int8_path.stat().st_size < cli_weights.stat().st_size

    def test_quantizing_int8_again_is_config_error(self, cli_weights, tmp_path):
        out = tmp_path / "q2"
        main(["quantize", "--weights", str(cli_weights), "--out", str(out)])
        again = main(["quantize", "--weights", str(out / "bcvad-bc.int8.weights"),
                      "--out", str(out)])
        assert again == 2

    def test_bench_reports_params_and_latency(self, cli_weights, tmp_path, capsys):
        out = tmp_path / "b"
        code = main(["bench", "--weights", str(cli_weights), "--frames", "200",
                     "--out", str(out), "--seed", "0"])
        stdout = capsys.readouterr().out
        assert code == 0
        assert "params=4409" in stdout
        assert re.search(r"int8: file=\d+B", stdout)
        assert "p95=" in stdout


class TestConfigFile:
    def test_key_value_parsing(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("train-clips = 3  # desk scale\n\ntest-clips = 3\n")
        values = read_config_file(cfg)
        assert values == {"train-clips": "3", "test-clips": "3"}

    def test_bad_line_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just some words\n")
        with pytest.raises(ConfigError):
            read_config_file(cfg)

    def test_flags_override_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "synth.cfg"
        cfg.write_text(
            "train-clips = 3\ntest-clips = 3\ntrain-speakers = 2\n"
            "test-speakers = 1\nclip-len-s = 6\nseed = 5\n"
        )
        out = tmp_path / "from-config"
        assert main(["synth", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "manifest.jsonl").exists()
