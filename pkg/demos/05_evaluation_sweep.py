"""Score detectors across noise conditions on a miniature test split.

Builds a small corpus, trains the bone-conduction model briefly, then sweeps
the DSP and neural detectors over noise types and SNRs, printing the report
rows and the DCF-versus-SNR comparison table.

Run:  python demos/05_evaluation_sweep.py   (a few minutes)
"""

import tempfile
from pathlib import Path

from bcvad import CorpusConfig, build_corpus, build_model
from bcvad.corpus import load_split_data
from bcvad.evaluate import DspDetector, NeuralDetector, dcf_versus_snr_table, evaluate_detector
from bcvad.storage import load_manifest
from bcvad.training import TrainSchedule, train

config = CorpusConfig(
    train_clips=18,
    test_clips=6,
    train_speakers=4,
    test_speakers=2,
    clip_len_s=10.0,
    sources_per_clip=1,
    source_duration_s=15.0,
    seed=23,
)

with tempfile.TemporaryDirectory() as tmp:
    corpus_dir = Path(tmp) / "corpus"
    build_corpus(config, corpus_dir)
    records = load_manifest(corpus_dir / "manifest.jsonl")
    data = load_split_data(corpus_dir, records)

    model = build_model("bc", seed=1)
    model, _ = train(model, data, TrainSchedule(steps_per_epoch=150, batch_size=4,
                                                max_epochs=5), seed=1)

    detectors = [DspDetector(), NeuralDetector(model, "neural-float")]
    reports = []
    for detector in detectors:
        report = evaluate_detector(
            detector, corpus_dir, records,
            snr_list=(0.0, 10.0), noise_types=("babble", "clean"), seed=2,
        )
        reports.append(report)
        print(f"\n{detector.name}:")
        for row in report.rows:
            snr = "  n/a" if row.snr_db != row.snr_db else f"{row.snr_db:+5.0f}"
            print(f"  {row.noise_type:7s} snr={snr} dB  dcf={row.dcf_pct:6.2f}%  "
                  f"acc={row.acc:.3f}  auc={row.auc:.3f}")

    print()
    print(dcf_versus_snr_table(reports, "babble"))
