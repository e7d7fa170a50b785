from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
ACCEPTANCE = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def tiny_corpus():
    from ragtuner.io import Document

    return [
        Document("a", "Marie Curie discovered polonium in Paris. She worked with Pierre Curie."),
        Document("b", "The Eiffel Tower stands in Paris. It was finished in 1889."),
        Document("c", "Alan Turing studied computation at Cambridge. He proposed the Turing test."),
    ]


@pytest.fixture
def tiny_dataset():
    from ragtuner.evaluation import QaExample

    return [
        QaExample("q1", "Where does the Eiffel Tower stand?", "Paris", ("b",)),
        QaExample("q2", "What did Marie Curie discover?", "polonium", ("a",)),
    ]
