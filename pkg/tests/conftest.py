from __future__ import annotations

from pathlib import Path

import pytest

from corpaforge.extraction import ConceptMatcher
from corpaforge.lexicon import load_lexicon
from corpaforge.pipeline import RunConfig, run_all

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "synthetic"


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon()


@pytest.fixture(scope="session")
def matcher(lexicon):
    return ConceptMatcher(lexicon)


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    assert DATA_DIR.exists(), "bundled synthetic corpus is missing"
    return DATA_DIR


@pytest.fixture(scope="session")
def seeded_run(tmp_path_factory, corpus_dir) -> tuple[RunConfig, dict]:
    """One seed-2 run of the whole pipeline over the bundled corpus."""
    out = tmp_path_factory.mktemp("run")
    cfg = RunConfig(
        out_dir=out,
        reports_dir=corpus_dir / "reports",
        pairing=corpus_dir / "pairing.csv",
        seed=2,
    )
    summary = run_all(cfg)
    return cfg, summary
