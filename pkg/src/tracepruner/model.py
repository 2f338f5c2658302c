"""Shared domain types: traces, pairs, clusters, and the run configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence


class TraceState(Enum):
    GENERATING = "generating"
    PAUSED = "paused"
    RESUMED = "resumed"
    HALTED = "halted"
    FINISHED = "finished"


# Lifecycle graph: Generating -> Paused -> {Resumed -> Finished, Halted}
_ALLOWED_TRANSITIONS = {
    (TraceState.GENERATING, TraceState.PAUSED),
    (TraceState.PAUSED, TraceState.RESUMED),
    (TraceState.PAUSED, TraceState.HALTED),
    (TraceState.RESUMED, TraceState.FINISHED),
}


class IllegalTransition(Exception):
    def __init__(self, from_state: TraceState, to_state: TraceState):
        self.from_state = from_state
        self.to_state = to_state
        super().__init__(f"illegal trace transition {from_state.value} -> {to_state.value}")


@dataclass(frozen=True)
class Trace:
    """One reasoning path: its token stream and lifecycle state."""

    trace_id: str
    problem_id: str
    tokens: tuple[str, ...] = ()
    prefix_len: int = 0
    state: TraceState = TraceState.GENERATING
    final_answer: Optional[str] = None
    total_tokens: int = 0

    def __post_init__(self):
        if self.state is TraceState.FINISHED:
            if self.final_answer is None:
                raise ValueError("finished trace must carry a final answer")
            if self.prefix_len > self.total_tokens:
                raise ValueError("prefix_len exceeds total_tokens on a finished trace")
        elif self.final_answer is not None:
            raise ValueError("final_answer only valid on a finished trace")


def transition(
    trace: Trace,
    to: TraceState,
    *,
    final_answer: Optional[str] = None,
    total_tokens: Optional[int] = None,
) -> Trace:
    """Return a copy of ``trace`` moved to state ``to``.

    Raises IllegalTransition for any edge not in the lifecycle graph.
    """
    if (trace.state, to) not in _ALLOWED_TRANSITIONS:
        raise IllegalTransition(trace.state, to)
    updates: dict = {"state": to}
    if final_answer is not None:
        updates["final_answer"] = final_answer
    if total_tokens is not None:
        updates["total_tokens"] = total_tokens
    return dataclasses.replace(trace, **updates)


@dataclass(frozen=True)
class TracePair:
    """Two truncated segments plus a binary same-answer label."""

    left: tuple[str, ...]
    right: tuple[str, ...]
    label: int
    source_trace_ids: tuple[str, str]
    problem_id: str = ""

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if not self.left or not self.right:
            raise ValueError("pair segments must be non-empty")


@dataclass
class Cluster:
    """A set of trace IDs predicted answer-equivalent, insertion order preserved."""

    cluster_id: int
    members: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Segment:
    """A paused trace's judge-visible prefix.

    ``answer_hint`` carries the ground-truth final answer for oracle and
    simulated judges on replay/synthetic sources; live sources leave it None.
    """

    trace_id: str
    tokens: tuple[str, ...]
    answer_hint: Optional[str] = None


@dataclass(frozen=True)
class TruncationMode:
    """Either a fixed token prefix or a reasoning-word aligned prefix."""

    kind: str  # "fixed_tokens" | "reasoning_words"
    k: int

    def __post_init__(self):
        if self.kind not in ("fixed_tokens", "reasoning_words"):
            raise ValueError(f"unknown truncation kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class AdaptiveThreshold:
    """Raise the join threshold while the cluster count stays high."""

    trigger_clusters: int = 16
    step: float = 0.03
    cap: float = 0.9


@dataclass(frozen=True)
class PruneConfig:
    """All online-phase knobs with their default values."""

    tau: float = 0.5
    max_clusters: int = 32            # K
    reps_per_cluster: int = 10        # K1
    finish_budget: int = 10           # K2
    singleton_fallback: int = 64      # K3
    trunc_mode: TruncationMode = TruncationMode("fixed_tokens", 500)
    adaptive_threshold: Optional[AdaptiveThreshold] = None
    rep_selection: str = "random"     # "random" | "earliest"
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        for name in ("max_clusters", "reps_per_cluster", "finish_budget", "singleton_fallback"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.rep_selection not in ("random", "earliest"):
            raise ValueError("rep_selection must be 'random' or 'earliest'")

    def to_dict(self) -> dict:
        d = {
            "tau": self.tau,
            "max_clusters": self.max_clusters,
            "reps_per_cluster": self.reps_per_cluster,
            "finish_budget": self.finish_budget,
            "singleton_fallback": self.singleton_fallback,
            "trunc_mode": {"kind": self.trunc_mode.kind, "k": self.trunc_mode.k},
            "rep_selection": self.rep_selection,
            "rng_seed": self.rng_seed,
        }
        if self.adaptive_threshold is not None:
            at = self.adaptive_threshold
            d["adaptive_threshold"] = {
                "trigger_clusters": at.trigger_clusters,
                "step": at.step,
                "cap": at.cap,
            }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PruneConfig":
        kwargs = dict(d)
        tm = kwargs.pop("trunc_mode", None)
        if tm is not None:
            kwargs["trunc_mode"] = TruncationMode(tm["kind"], tm["k"])
        at = kwargs.pop("adaptive_threshold", None)
        if at is not None:
            kwargs["adaptive_threshold"] = AdaptiveThreshold(**at)
        return cls(**kwargs)


@dataclass
class ProblemReport:
    """Per-problem accounting for one pruning run."""

    problem_id: str
    tokens_consumed: int = 0
    judge_calls: int = 0
    judge_tokens: int = 0          # reported separately, never folded into tokens_consumed
    cluster_sizes: list[int] = field(default_factory=list)
    voted_answer: Optional[str] = None
    vote_tally: int = 0
    correct: Optional[bool] = None
    pass_at_k: Optional[bool] = None
    eval_rep_tokens: int = 0       # evaluation-mode representative resumption, kept out of tokens_consumed
    n_traces: int = 0
    n_finishers: int = 0
    n_halted: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class BenchmarkReport:
    """Aggregate over per-problem reports."""

    problems: list[ProblemReport] = field(default_factory=list)
    accuracy: Optional[float] = None
    total_tokens: int = 0
    total_judge_calls: int = 0
    total_judge_tokens: int = 0
    delta_token_pct: Optional[float] = None
    baseline_tokens: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "total_tokens": self.total_tokens,
            "total_judge_calls": self.total_judge_calls,
            "total_judge_tokens": self.total_judge_tokens,
            "delta_token_pct": self.delta_token_pct,
            "baseline_tokens": self.baseline_tokens,
            "problems": [p.to_dict() for p in self.problems],
        }


def tokenize(text: str) -> tuple[str, ...]:
    """Whitespace tokenization; replay files may carry an explicit token array instead."""
    return tuple(text.split())


def check_partition(clusters: Sequence[Cluster], assigned: Sequence[str]) -> bool:
    """True iff cluster membership partitions the assigned trace IDs exactly."""
    seen: list[str] = []
    for c in clusters:
        seen.extend(c.members)
    return len(seen) == len(set(seen)) and set(seen) == set(assigned)
