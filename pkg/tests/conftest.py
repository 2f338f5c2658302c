import numpy as np
import pytest

from tracepruner.model import TracePair
from tracepruner.truncation import ReasoningLexicon


@pytest.fixture
def lexicon():
    return ReasoningLexicon.default()


# Two well-separated "answer themes": same-answer pairs share vocabulary,
# numeric literals, reasoning markers, and lengths; different-answer pairs
# share none of them.  Linearly separable in the pair feature space.
_VOCAB_A = [f"alpha{i}" for i in range(30)]
_VOCAB_B = [f"beta{i}" for i in range(30)]


def _segment(rng, vocab, numeric, markers, length):
    tokens = [vocab[rng.integers(len(vocab))] for _ in range(length)]
    tokens[rng.integers(length)] = numeric
    tokens[rng.integers(length)] = markers[rng.integers(len(markers))]
    return tuple(tokens)


def make_feature_corpus(n_pairs: int, pos_frac: float, seed: int = 0,
                        n_problems: int = 20) -> list[TracePair]:
    """Synthetic labeled pair corpus, linearly separable in feature space."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n_pairs):
        pid = f"prob-{i % n_problems:03d}"
        if rng.random() < pos_frac:
            left = _segment(rng, _VOCAB_A, "7", ["thus", "wait"], 20)
            right = _segment(rng, _VOCAB_A, "7", ["thus", "wait"], 22)
            label = 1
        else:
            left = _segment(rng, _VOCAB_A, "7", ["thus"], 20)
            right = _segment(rng, _VOCAB_B, "9", ["however"], 45)
            label = 0
        pairs.append(
            TracePair(left=left, right=right, label=label,
                      source_trace_ids=(f"t{2 * i}", f"t{2 * i + 1}"), problem_id=pid)
        )
    return pairs


# ---------------------------------------------------------------------------
# Acceptance verdict lines: one PASS/FAIL line per numbered criterion.

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _acceptance_outcomes[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance_outcomes):
        label = name.removeprefix("test_criterion_").replace("_", " ")
        number, _, rest = label.partition(" ")
        terminalreporter.write_line(
            f"criterion {int(number):2d} [{_acceptance_outcomes[name]}] {rest}"
        )
