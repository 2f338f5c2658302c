"""Finisher selection and majority voting over completed answers."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .answers import reward
from .clustering import ClusterState


class EmptyState(Exception):
    pass


class EmptyAnswerList(Exception):
    pass


def select_finishers(
    state: ClusterState,
    eligible_ids: Sequence[str],
    rng: Optional[np.random.Generator] = None,
) -> list[str]:
    """Trace IDs allowed to resume to completion.

    Normal case: the first min(|c_max|, K2) members of the largest cluster in
    insertion order (largest-cluster ties break toward the lowest index).
    All-singleton fallback: a seeded uniform sample of min(K3, N) IDs from the
    eligible set, since singleton-only clustering means the judge is likely
    wrong.  Halted traces are never eligible.
    """
    if not state.clusters:
        raise EmptyState("clustering produced no clusters")
    cfg = state.config
    if all(len(c) == 1 for c in state.clusters):
        if rng is None:
            rng = np.random.default_rng(cfg.rng_seed + 1)
        n = len(eligible_ids)
        k = min(cfg.singleton_fallback, n)
        picks = sorted(rng.choice(n, size=k, replace=False))
        return [eligible_ids[i] for i in picks]
    sizes = [len(c) for c in state.clusters]
    c_max = state.clusters[sizes.index(max(sizes))]
    eligible = set(eligible_ids)
    chosen = [tid for tid in c_max.members if tid in eligible]
    return chosen[: cfg.finish_budget]


def majority_vote(answers: Sequence[str]) -> tuple[str, int]:
    """Largest equivalence group's first representative and its tally.

    Answers pool by the equivalence reward (so "0.5" and "1/2" vote together);
    ties break toward the earliest first-occurring group.
    """
    if not answers:
        raise EmptyAnswerList("majority_vote needs at least one answer")
    reps: list[str] = []
    tallies: list[int] = []
    for ans in answers:
        for i, rep in enumerate(reps):
            if reward(ans, rep) == 1:
                tallies[i] += 1
                break
        else:
            reps.append(ans)
            tallies.append(1)
    best = tallies.index(max(tallies))
    return reps[best], tallies[best]
