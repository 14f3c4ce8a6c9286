from pathlib import Path

import pytest

from battkit.protocol import load_protocol
from battkit.semantic import load_cells_dir, load_context

DATA = Path(__file__).resolve().parent.parent / "src" / "battkit" / "data"

MINIMAL = DATA / "protocols" / "minimal_example.json"
CYCLE_LIFE = DATA / "protocols" / "mj1_cycle_life.json"
CELLS_DIR = DATA / "cells"
QUERIES_DIR = DATA / "queries"
CORPUS_DIR = DATA / "corpus"
CONTEXT = DATA / "context.json"
ALIASES = DATA / "aliases.json"

MJ1_IRI = "https://www.wikidata.org/wiki/Q120766894"
M50_IRI = "https://example.org/battkit/cells/lg-inr21700-m50"


@pytest.fixture(scope="session")
def ctx():
    return load_context(CONTEXT)


@pytest.fixture()
def minimal_protocol():
    return load_protocol(MINIMAL)


@pytest.fixture()
def cycle_life_protocol():
    return load_protocol(CYCLE_LIFE)


@pytest.fixture(scope="session")
def cell_records(ctx):
    return load_cells_dir(CELLS_DIR, ctx)
