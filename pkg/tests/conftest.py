"""Shared fixtures: a small session-scoped corpus and trained weights."""

import pytest

from bcvad.corpus import CorpusConfig, build_corpus

MINI_CORPUS_CONFIG = CorpusConfig(
    train_clips=3,
    test_clips=3,
    train_speakers=2,
    test_speakers=1,
    clip_len_s=8.0,
    sources_per_clip=1,
    source_duration_s=12.0,
    seed=21,
)


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """Tiny corpus (3+3 clips of 8 s) reused across integration tests."""
    out = tmp_path_factory.mktemp("corpus") / "mini"
    build_corpus(MINI_CORPUS_CONFIG, out)
    return out
