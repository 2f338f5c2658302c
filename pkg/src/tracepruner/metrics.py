"""Evaluation math: ROC/AUROC, TNR@FNR, token reduction, cluster-level pass@k.

Convention throughout: positive class = same-answer pair (label 1), and a
score >= threshold predicts positive (ties count as positive).
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .answers import reward


class SingleClass(Exception):
    pass


class LengthMismatch(Exception):
    pass


class ZeroBaseline(Exception):
    pass


def _validate(scores: Sequence[float], labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    if len(s) != len(y):
        raise LengthMismatch(f"{len(s)} scores vs {len(y)} labels")
    if len(y) == 0 or y.min() == y.max():
        raise SingleClass("both classes must be present")
    return s, y


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie), via tied midranks (Mann-Whitney).

    Equals the trapezoidal area under the ROC curve.
    """
    s, y = _validate(scores, labels)
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_s = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def tnr_at_fnr(
    scores: Sequence[float], labels: Sequence[int], fnr_cap: float = 0.2
) -> tuple[float, float]:
    """Best true-negative rate with the false-negative rate held at or below the cap.

    FNR = positives scored below the threshold; TNR = negatives scored below
    it.  Thresholds sweep the observed score values (step function, no
    interpolation); returns (tnr, threshold).
    """
    if not 0.0 <= fnr_cap <= 1.0:
        raise ValueError("fnr_cap must lie in [0, 1]")
    s, y = _validate(scores, labels)
    pos = np.sort(s[y == 1])
    neg = np.sort(s[y == 0])
    best_tnr: Optional[float] = None
    best_thr = float("nan")
    for thr in np.unique(s):
        fnr = np.searchsorted(pos, thr, side="left") / len(pos)
        if fnr > fnr_cap:
            continue
        tnr = np.searchsorted(neg, thr, side="left") / len(neg)
        if best_tnr is None or tnr > best_tnr:
            best_tnr, best_thr = float(tnr), float(thr)
    # The lowest observed threshold always has FNR 0, so one is admissible.
    assert best_tnr is not None
    return best_tnr, best_thr


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> list[tuple[float, float]]:
    """Monotone (fpr, tpr) points from (0,0) to (1,1) over observed thresholds.

    Equal scores collapse into one step, so the trapezoid over these points
    reproduces auroc() exactly, ties included.
    """
    s, y = _validate(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    points = [(0.0, 0.0)]
    tp = fp = 0
    # Descending thresholds; at each unique score everything >= it is positive.
    order = np.argsort(-s, kind="mergesort")
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[order[j + 1]] == s[order[i]]:
            j += 1
        for idx in order[i : j + 1]:
            if y[idx] == 1:
                tp += 1
            else:
                fp += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j + 1
    return points


def trapezoid_area(points: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def delta_token_pct(tokens_pruned: float, tokens_origin: float) -> float:
    """Signed percent change versus the baseline; negative means savings."""
    if tokens_origin <= 0:
        raise ZeroBaseline("baseline token count must be positive")
    return (tokens_pruned - tokens_origin) / tokens_origin * 100.0


def pass_at_clusters(representative_answers: Sequence[str], gold: str) -> bool:
    """True iff any per-cluster representative answer matches gold."""
    return any(reward(a, gold) == 1 for a in representative_answers)


def roc_to_csv(points: Sequence[tuple[float, float]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        writer.writerows(points)


def report_to_csv(report, path: str | Path) -> None:
    """Per-problem summary rows plus one aggregate row (column order fixed)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["problem_id", "tokens_consumed", "judge_calls", "judge_tokens",
             "n_clusters", "voted_answer", "correct", "pass_at_k"]
        )
        for p in report.problems:
            writer.writerow(
                [p.problem_id, p.tokens_consumed, p.judge_calls, p.judge_tokens,
                 len(p.cluster_sizes), p.voted_answer, p.correct, p.pass_at_k]
            )
        delta: Optional[float] = report.delta_token_pct
        writer.writerow(
            ["TOTAL", report.total_tokens, report.total_judge_calls, report.total_judge_tokens,
             "", "", report.accuracy, "" if delta is None else f"{delta:.1f}%"]
        )
