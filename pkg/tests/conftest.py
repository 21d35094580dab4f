from pathlib import Path

import pytest
from hypothesis import strategies as st

from guardflow import guard as G
from guardflow.ir import parse
from guardflow.pipeline import analyze_program

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


def corpus_text(name: str) -> str:
    return (CORPUS / f"{name}.ir").read_text()


def analyze_corpus(name: str, **cfg):
    from guardflow.config import AnalysisConfig

    return analyze_program(parse(corpus_text(name)), AnalysisConfig(**cfg))


def guards(max_atom: int = 6, max_leaves: int = 12):
    """Hypothesis strategy for random guards over atoms 1..max_atom."""
    leaf = st.builds(G.lit, st.integers(1, max_atom), st.booleans()) | st.sampled_from([G.TRUE, G.FALSE])

    def extend(children):
        return (
            st.lists(children, min_size=2, max_size=4).map(G.conj_all)
            | st.lists(children, min_size=2, max_size=4).map(G.disj_all)
            | children.map(G.neg)
        )

    return st.recursive(leaf, extend, max_leaves=max_leaves)


@pytest.fixture(scope="session")
def random_corpus():
    """The seeded differential corpus used by several test modules."""
    from guardflow.randprog import corpus

    return list(corpus(200, seed=0))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
