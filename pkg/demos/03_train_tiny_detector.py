"""Train a small bone-conduction detector end to end at toy scale.

Builds a miniature corpus (short clips, few speakers), trains the 4.4k
parameter conv-GRU detector for a couple of epochs with exact-gradient BPTT,
and reports the loss trajectory.  Toy scale only; the full recipe is
`bcvad synth` + `bcvad train`.

Run:  python demos/03_train_tiny_detector.py   (about a minute)
"""

import tempfile
import time
from pathlib import Path

from bcvad import CorpusConfig, build_corpus, build_model, count_params
from bcvad.corpus import load_split_data
from bcvad.storage import load_manifest
from bcvad.training import TrainSchedule, train

config = CorpusConfig(
    train_clips=6,
    test_clips=3,
    train_speakers=4,
    test_speakers=1,
    clip_len_s=8.0,
    sources_per_clip=1,
    source_duration_s=12.0,
    seed=11,
)

with tempfile.TemporaryDirectory() as tmp:
    corpus_dir = Path(tmp) / "corpus"
    t0 = time.time()
    build_corpus(config, corpus_dir)
    print(f"built {config.train_clips}+{config.test_clips} clip corpus "
          f"in {time.time() - t0:.1f} s")

    data = load_split_data(corpus_dir, load_manifest(corpus_dir / "manifest.jsonl"))
    model = build_model("bc", seed=0)
    print(f"bc model: {count_params(model)} parameters")

    schedule = TrainSchedule(steps_per_epoch=40, batch_size=4, max_epochs=3)
    t0 = time.time()
    model, history = train(
        model, data, schedule, seed=0,
        log=lambda h: print(f"  epoch {h.epoch}: train={h.train_loss:.4f} "
                            f"test={h.test_loss:.4f} lr={h.lr:g}"),
    )
    print(f"trained {schedule.max_epochs} epochs in {time.time() - t0:.1f} s")
    print(f"test BCE went {history[0].test_loss:.4f} -> {history[-1].test_loss:.4f}")
