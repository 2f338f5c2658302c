"""Extract the judge-visible prefix of an unfinished trace.

Two strategies: a fixed token prefix, or a prefix ending at the k-th
occurrence of a reasoning marker word ("wait", "thus", ...).
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_LEXICON_WORDS = frozenset(
    {
        "wait",
        "thus",
        "since",
        "so",
        "because",
        "therefore",
        "alternatively",
        "but",
        "however",
        "check",
        "hmm",
    }
)

_PUNCT = string.punctuation


@dataclass(frozen=True)
class ReasoningLexicon:
    words: frozenset[str]

    def __post_init__(self):
        if not self.words:
            raise ValueError("lexicon must be non-empty")
        for w in self.words:
            if w != w.lower() or any(ch.isspace() for ch in w):
                raise ValueError(f"lexicon entries must be lowercase, no whitespace: {w!r}")

    @classmethod
    def default(cls) -> "ReasoningLexicon":
        return cls(DEFAULT_LEXICON_WORDS)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "ReasoningLexicon":
        return cls(frozenset(w.strip().lower() for w in words if w.strip()))

    @classmethod
    def from_file(cls, path: str | Path) -> "ReasoningLexicon":
        # One word per line; blank lines ignored.
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls.from_words(lines)


def _core(token: str) -> str:
    """Strip surrounding ASCII punctuation and lowercase ("Wait," -> "wait")."""
    return token.strip(_PUNCT).lower()


def is_reasoning_word(token: str, lexicon: ReasoningLexicon) -> bool:
    return _core(token) in lexicon.words


def truncate_fixed(tokens: Sequence[str], k: int) -> tuple[str, ...]:
    """First min(k, len) tokens."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return tuple(tokens[:k])


def truncate_reasoning(tokens: Sequence[str], k: int, lexicon: ReasoningLexicon) -> tuple[str, ...]:
    """Prefix ending at (and including) the token with the k-th marker occurrence.

    Fewer than k occurrences: the whole sequence is returned.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    seen = 0
    for i, tok in enumerate(tokens):
        if is_reasoning_word(tok, lexicon):
            seen += 1
            if seen == k:
                return tuple(tokens[: i + 1])
    return tuple(tokens)


def count_reasoning_words(tokens: Sequence[str], lexicon: ReasoningLexicon) -> int:
    return sum(1 for tok in tokens if is_reasoning_word(tok, lexicon))


def pause_index(tokens: Sequence[str], kind: str, k: int, lexicon: ReasoningLexicon) -> int:
    """Token count retained at the pause point for either strategy."""
    if kind == "fixed_tokens":
        return min(k, len(tokens))
    if kind == "reasoning_words":
        return len(truncate_reasoning(tokens, k, lexicon))
    raise ValueError(f"unknown truncation kind {kind!r}")
