"""Command-line harness: synth, train, eval, stream, quantize, bench."""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .audio import load_wav
from .corpus import CorpusConfig, build_corpus, load_corpus_config, load_split_data
from .dsp_vad import DspVadParams, LrtState, init_noise_estimate, process_frame
from .errors import ConfigError, DataError, FormatError, VadError
from .evaluate import (
    DEFAULT_NOISE_TYPES,
    dcf_versus_snr_table,
    evaluate_detectors,
    make_detector,
)
from .features import make_window, stft_magnitude
from .model import (
    RecurrentState,
    build_model,
    count_params,
    forward_step,
    load_model,
    quantize_weights,
    save_model,
)
from .storage import load_manifest
from .training import TrainSchedule, save_history, train

EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR = 3
EXIT_FORMAT_ERROR = 4

DETECTOR_KINDS = ("dsp", "neural-float", "neural-int8")


def read_config_file(path) -> dict[str, str]:
    """Flat key = value text; '#' starts a comment."""
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    for i, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


class Options:
    """Merged view of CLI flags over config-file values."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file_values = read_config_file(args.config) if args.config else {}

    def get(self, key: str, default=None, cast=str):
        flag = getattr(self.args, key.replace("-", "_"), None)
        if flag is not None:
            return flag
        if key in self.file_values:
            raw = self.file_values[key]
            try:
                return cast(raw) if cast is not bool else raw.lower() in ("1", "true", "yes")
            except ValueError as exc:
                raise ConfigError(f"config key {key}={raw!r}: {exc}") from exc
        return default

    def require(self, key: str, cast=str):
        value = self.get(key, None, cast)
        if value is None:
            raise ConfigError(f"missing required option --{key} (flag or config file)")
        return value

    def out_dir(self) -> Path:
        out = Path(self.require("out"))
        out.mkdir(parents=True, exist_ok=True)
        return out


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_str_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _dsp_params(opts: Options) -> DspVadParams:
    return DspVadParams(
        alpha0=opts.get("alpha0", 0.95, float),
        beta=opts.get("beta", 0.98, float),
        eta=opts.get("eta", float(np.exp(0.15)), float),
        init_frames=opts.get("init-frames", 10, int),
        eps_floor=opts.get("eps-floor", 1e-12, float),
    )


def cmd_synth(opts: Options) -> int:
    seed = opts.require("seed", int)
    out = opts.out_dir()
    signal = opts.get("signal", "bc")
    base = CorpusConfig.air_defaults if signal == "air" else CorpusConfig
    config = base(
        seed=seed,
        train_clips=opts.get("train-clips", 240, int),
        test_clips=opts.get("test-clips", 42, int),
        train_speakers=opts.get("train-speakers", 16, int),
        test_speakers=opts.get("test-speakers", 4, int),
        clip_len_s=opts.get("clip-len-s", 30.0, float),
    )
    print(f"synthesizing {config.train_clips}+{config.test_clips} clips into {out}")
    records = build_corpus(
        config,
        out,
        progress=lambda done, total, rec: print(
            f"  [{done}/{total}] {rec.clip_id} class={rec.content_class} "
            f"noise={rec.noise_kind} snr={rec.snr_db:.1f}dB",
            file=sys.stderr,
        ),
    )
    for split in ("train", "test"):
        counts = {
            c: sum(1 for r in records if r.split == split and r.content_class == c)
            for c in ("low", "medium", "high")
        }
        speakers = sorted({r.speaker_seed for r in records if r.split == split})
        print(f"{split}: {counts['low']}/{counts['medium']}/{counts['high']} "
              f"low/medium/high clips, {len(speakers)} speakers")
    train_speakers = {r.speaker_seed for r in records if r.split == "train"}
    test_speakers = {r.speaker_seed for r in records if r.split == "test"}
    print(f"speaker seeds disjoint across splits: {train_speakers.isdisjoint(test_speakers)}")
    manifest_hash = hashlib.sha256((out / "manifest.jsonl").read_bytes()).hexdigest()
    print(f"manifest sha256: {manifest_hash}")
    return 0


def cmd_train(opts: Options) -> int:
    seed = opts.require("seed", int)
    corpus_dir = Path(opts.require("corpus"))
    out = opts.out_dir()
    config = load_corpus_config(corpus_dir)
    manifest_path = corpus_dir / "manifest.jsonl"
    if not manifest_path.exists():
        raise DataError(f"no manifest.jsonl under {corpus_dir}")
    records = load_manifest(manifest_path)
    data = load_split_data(corpus_dir, records)
    arch = opts.get("arch", config.signal)
    schedule = TrainSchedule(
        lr_init=opts.get("lr", 0.001, float),
        steps_per_epoch=opts.get("steps-per-epoch", 2000, int),
        batch_size=opts.get("batch-size", 8, int),
        max_epochs=opts.get("max-epochs", None, int),
    )
    model = build_model(arch, seed=seed)
    print(f"training {arch} model ({count_params(model)} params) on "
          f"{len(data.train)} train / {len(data.test)} test clips")
    _, history = train(
        model,
        data,
        schedule,
        seed=seed,
        log=lambda h: print(
            f"epoch {h.epoch}: train={h.train_loss:.4f} test={h.test_loss:.4f} lr={h.lr:g}"
        ),
    )
    weights_path = out / f"bcvad-{arch}.weights"
    save_model(weights_path, model)
    save_history(out / "history.csv", history)
    print(f"saved weights to {weights_path} ({weights_path.stat().st_size} bytes)")
    print(f"best test loss: {min(h.test_loss for h in history):.4f}")
    return 0


def cmd_eval(opts: Options) -> int:
    seed = opts.require("seed", int)
    corpus_dir = Path(opts.require("corpus"))
    out = opts.out_dir()
    kinds = _parse_str_list(opts.get("detector", "dsp"))
    if kinds == ("all",):
        kinds = DETECTOR_KINDS
    for kind in kinds:
        if kind not in DETECTOR_KINDS:
            raise ConfigError(f"unknown detector {kind!r}, expected one of {DETECTOR_KINDS}")
    weights = opts.get("weights")
    snr_list = _parse_float_list(opts.get("snr-list", "-5,0,5,10,15"))
    noise_types = _parse_str_list(opts.get("noise-types", ",".join(DEFAULT_NOISE_TYPES)))
    truth_mode = opts.get("truth", "smoothed")
    manifest = load_manifest(corpus_dir / "manifest.jsonl")

    detectors = [make_detector(kind, weights, _dsp_params(opts)) for kind in kinds]
    print(f"evaluating {', '.join(d.name for d in detectors)} over "
          f"{len(noise_types)} noise types x {len(snr_list)} SNRs")
    reports = evaluate_detectors(
        detectors,
        corpus_dir,
        manifest,
        snr_list=snr_list,
        noise_types=noise_types,
        seed=seed,
        truth_mode=truth_mode,
        progress=lambda done, total, row: print(
            f"  [{done}/{total}] {row.noise_type} snr={row.snr_db:g} "
            f"dcf={row.dcf_pct:.2f}% acc={row.acc:.3f} auc={row.auc:.3f}",
            file=sys.stderr,
        ),
    )
    for report in reports:
        report_path = out / f"report-{report.detector}.csv"
        report_path.write_text(report.to_csv(), encoding="ascii")
        print(f"wrote {report_path}")
    sweep_types = [t for t in noise_types if t != "clean"]
    table_noise = "babble" if "babble" in sweep_types else (sweep_types[0] if sweep_types else None)
    if table_noise:
        table = dcf_versus_snr_table(reports, table_noise)
        (out / "dcf_table.txt").write_text(table, encoding="ascii")
        print(table, end="")
    return 0


def cmd_stream(opts: Options) -> int:
    wav_path = opts.require("wav")
    kind = opts.get("detector", "neural-float")
    audio = load_wav(wav_path)
    if kind == "dsp":
        times = _stream_dsp(audio, _dsp_params(opts))
    else:
        detector = make_detector(kind, opts.require("weights"))
        times = _stream_neural(audio, detector.model, detector.feat)
    if times.size:
        print(f"# mean_ms={times.mean():.3f} p95_ms={np.percentile(times, 95):.3f}")
    return 0


def _stream_neural(audio, model, feat) -> np.ndarray:
    cfg = feat.spectrogram
    window = make_window(cfg.window, cfg.frame_len)
    bank = feat.build_bank()
    weights_t = bank.weights.T
    state = RecurrentState.zero(model)
    n_frames = cfg.frame_count(len(audio))
    times = np.empty(n_frames)
    for j in range(n_frames):
        start = time.perf_counter()
        frame = audio.samples[j * cfg.hop : j * cfg.hop + cfg.frame_len]
        spectrum = np.abs(np.fft.rfft(frame * window, n=cfg.fft_size))
        feats = np.log(np.maximum(spectrum @ weights_t, 1e-10)).astype(np.float32)
        prob, state = forward_step(model, feats, state)
        times[j] = (time.perf_counter() - start) * 1000.0
        decision = int(prob > 0.5)
        print(f"{j} {j * cfg.hop * 1000 // cfg.sample_rate} {prob:.6f} {decision}")
    return times


def _stream_dsp(audio, params: DspVadParams) -> np.ndarray:
    mag = stft_magnitude(audio)
    cfg = mag.config
    noise = init_noise_estimate(mag, params.init_frames, params.alpha0, params.eps_floor)
    state = LrtState.fresh(mag.frames.shape[1], params.beta, params.eta)
    times = np.empty(mag.n_frames)
    threshold = float(np.log(params.eta))
    for j in range(mag.n_frames):
        start = time.perf_counter()
        if j < params.init_frames:
            score, decision = 0.0, 0
        else:
            decision, score, noise, state = process_frame(
                mag.frames[j], noise, state, params.corrected
            )
        times[j] = (time.perf_counter() - start) * 1000.0
        print(f"{j} {j * cfg.hop * 1000 // cfg.sample_rate} {score:.6f} {decision}")
    return times


def cmd_quantize(opts: Options) -> int:
    weights_path = Path(opts.require("weights"))
    out = opts.out_dir()
    model = load_model(weights_path)
    if model.precision == "int8":
        raise ConfigError("weight file is already int8")
    quantized = quantize_weights(model)
    out_path = out / (weights_path.stem + ".int8.weights")
    save_model(out_path, quantized)
    before = weights_path.stat().st_size
    after = out_path.stat().st_size
    print(f"{weights_path} ({before} bytes) -> {out_path} ({after} bytes)")
    return 0


def cmd_bench(opts: Options) -> int:
    weights_path = Path(opts.require("weights"))
    out = opts.out_dir()
    n_frames = opts.get("frames", 10000, int)
    model = load_model(weights_path)
    if model.precision == "int8":
        raise ConfigError("bench expects a float weight file; it quantizes internally")
    quantized = quantize_weights(model)
    int8_path = out / (weights_path.stem + ".int8.weights")
    save_model(int8_path, quantized)
    rng = np.random.default_rng(opts.get("seed", 0, int))
    frames = rng.standard_normal((n_frames, model.arch.input_bins)).astype(np.float32)
    print(f"arch={model.arch.name} params={count_params(model)}")
    for name, m, path in (("float32", model, weights_path), ("int8", quantized, int8_path)):
        state = RecurrentState.zero(m)
        times = np.empty(n_frames)
        for j in range(n_frames):
            start = time.perf_counter()
            _, state = forward_step(m, frames[j], state)
            times[j] = (time.perf_counter() - start) * 1000.0
        bytes_per = 1 if name == "int8" else 4
        print(
            f"{name}: file={Path(path).stat().st_size}B "
            f"params_mem={count_params(m) * bytes_per}B "
            f"per-frame ms mean={times.mean():.4f} p50={np.percentile(times, 50):.4f} "
            f"p95={np.percentile(times, 95):.4f} p99={np.percentile(times, 99):.4f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcvad", description="Streaming voice-activity-detection toolkit"
    )
    parser.add_argument("--version", action="version", version=f"bcvad {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="master seed (required for stochastic commands)")
    common.add_argument("--out", help="output directory")

    p = sub.add_parser("synth", parents=[common], help="synthesize a corpus")
    p.add_argument("--signal", choices=("bc", "air"))
    p.add_argument("--train-clips", type=int)
    p.add_argument("--test-clips", type=int)
    p.add_argument("--train-speakers", type=int)
    p.add_argument("--test-speakers", type=int)
    p.add_argument("--clip-len-s", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a detector on a corpus")
    p.add_argument("--corpus", help="corpus directory from synth")
    p.add_argument("--arch", choices=("bc", "air"))
    p.add_argument("--lr", type=float)
    p.add_argument("--steps-per-epoch", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--max-epochs", type=int)
    p.set_defaults(func=cmd_train)

    dsp_flags = argparse.ArgumentParser(add_help=False)
    dsp_flags.add_argument("--alpha0", type=float, help="DSP noise-variance smoothing")
    dsp_flags.add_argument("--beta", type=float, help="DSP decision-directed weight")
    dsp_flags.add_argument("--eta", type=float, help="DSP likelihood-ratio threshold")
    dsp_flags.add_argument("--init-frames", type=int, help="DSP noise-init frame count")
    dsp_flags.add_argument("--eps-floor", type=float, help="DSP noise-variance floor")

    p = sub.add_parser("eval", parents=[common, dsp_flags],
                       help="evaluate detectors over conditions")
    p.add_argument("--corpus")
    p.add_argument("--detector", help="comma list of dsp,neural-float,neural-int8 or 'all'")
    p.add_argument("--weights")
    p.add_argument("--snr-list")
    p.add_argument("--noise-types")
    p.add_argument("--truth", choices=("smoothed", "raw"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stream", parents=[common, dsp_flags],
                       help="stream decisions for a WAV file")
    p.add_argument("--wav")
    p.add_argument("--weights")
    p.add_argument("--detector", choices=DETECTOR_KINDS)
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("quantize", parents=[common], help="quantize weights to int8")
    p.add_argument("--weights")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("bench", parents=[common], help="latency and footprint report")
    p.add_argument("--weights")
    p.add_argument("--frames", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(Options(args))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT_ERROR
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except VadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
