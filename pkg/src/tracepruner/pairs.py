"""Offline trace-pair dataset construction: exhaustive pairing, truncation,
reward labeling, and JSONL serialization."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .answers import normalize, reward
from .model import TracePair, TruncationMode
from .pipeline import RecordedTrace, SchemaError
from .truncation import ReasoningLexicon, truncate_fixed, truncate_reasoning


class EmptyPairSet(Exception):
    pass


def _truncate(tokens: Sequence[str], mode: TruncationMode, lexicon: ReasoningLexicon):
    if mode.kind == "fixed_tokens":
        return truncate_fixed(tokens, mode.k)
    return truncate_reasoning(tokens, mode.k, lexicon)


def _has_valid_answer(trace: RecordedTrace) -> bool:
    # Traces that never produced a parseable answer are excluded from pairing.
    return bool(trace.final_answer) and bool(normalize(trace.final_answer).canonical)


def build_pairs(
    traces: Sequence[RecordedTrace],
    mode: TruncationMode,
    lexicon: Optional[ReasoningLexicon] = None,
) -> list[TracePair]:
    """All C(n, 2) unordered pairs for one problem's finished traces.

    Each pair stores both truncated segments and label = reward(o_i, o_j);
    (left, right) orientation follows trace_id order.
    """
    lexicon = lexicon or ReasoningLexicon.default()
    valid = sorted((t for t in traces if _has_valid_answer(t)), key=lambda t: t.trace_id)
    segments = {t.trace_id: _truncate(t.tokens, mode, lexicon) for t in valid}
    pairs = []
    for i in range(len(valid)):
        for j in range(i + 1, len(valid)):
            a, b = valid[i], valid[j]
            pairs.append(
                TracePair(
                    left=segments[a.trace_id],
                    right=segments[b.trace_id],
                    label=reward(a.final_answer, b.final_answer),
                    source_trace_ids=(a.trace_id, b.trace_id),
                    problem_id=a.problem_id,
                )
            )
    return pairs


def same_answer_ratio(pairs: Sequence[TracePair]) -> float:
    if not pairs:
        raise EmptyPairSet("cannot compute a ratio over zero pairs")
    return sum(p.label for p in pairs) / len(pairs)


def split_dataset(
    pairs: Sequence[TracePair], train_frac: float, seed: int = 0
) -> tuple[list[TracePair], list[TracePair]]:
    """Seeded split grouped by problem_id, so no problem straddles the split."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie strictly between 0 and 1")
    by_problem: dict[str, list[TracePair]] = {}
    for p in pairs:
        by_problem.setdefault(p.problem_id, []).append(p)
    problems = sorted(by_problem)
    rng = np.random.default_rng(seed)
    rng.shuffle(problems)
    n_train = int(round(train_frac * len(problems)))
    n_train = max(1, min(n_train, len(problems) - 1)) if len(problems) > 1 else len(problems)
    train_problems = set(problems[:n_train])
    train = [p for pid in problems[:n_train] for p in by_problem[pid]]
    test = [p for pid in problems[n_train:] for p in by_problem[pid]]
    assert len(train) + len(test) == len(pairs) and not train_problems & set(problems[n_train:])
    return train, test


def write_pairs(pairs: Iterable[TracePair], mode: TruncationMode, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(
                json.dumps(
                    {
                        "problem_id": p.problem_id,
                        "left_id": p.source_trace_ids[0],
                        "right_id": p.source_trace_ids[1],
                        "left_segment": list(p.left),
                        "right_segment": list(p.right),
                        "label": p.label,
                        "trunc_mode": mode.kind,
                        "k": mode.k,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_pairs(path: str | Path) -> list[TracePair]:
    out = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append(
                TracePair(
                    left=tuple(rec["left_segment"]),
                    right=tuple(rec["right_segment"]),
                    label=int(rec["label"]),
                    source_trace_ids=(str(rec["left_id"]), str(rec["right_id"])),
                    problem_id=str(rec.get("problem_id", "")),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise SchemaError(str(path), line_no, f"bad pair record: {exc!r}")
    return out
