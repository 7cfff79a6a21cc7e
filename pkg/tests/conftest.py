from datetime import date
from pathlib import Path

import pytest

from fusegraph import Engine, EngineConfig
from fusegraph.synth import SyntheticSpec, generate

DATA_DIR = Path(__file__).parent / "data"

REF_DATE = date(2026, 8, 10)

# Small hierarchical corpus shared across retrieval/service/engine tests.
FIXTURE_SPEC = SyntheticSpec(
    papers=16,
    sections_per_paper=(2, 3),
    units_per_section=(2, 3),
    citations_per_paper=3,
    associations_per_unit=1.0,
    vocab_size=400,
    topics=4,
    seed=7,
)


@pytest.fixture(scope="session")
def fixture_corpus():
    return generate(FIXTURE_SPEC)


@pytest.fixture(scope="session")
def fixture_engine(fixture_corpus):
    """Engine over the fixture corpus with probing pinned to full scan."""
    nodes, edges = fixture_corpus
    engine = Engine(EngineConfig(probe_count=100000))
    engine.ingest(nodes, edges)
    return engine


@pytest.fixture(scope="session")
def ref_date():
    return REF_DATE
