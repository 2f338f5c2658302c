"""Online greedy clustering of paused trace segments.

Each arriving segment either joins the most similar existing cluster (mean
judge score over sampled representatives above the threshold), opens a new
cluster, or - once the cluster cap is hit by a non-matching arrival -
terminates clustering altogether.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .judge import Judge
from .model import Cluster, PruneConfig, Segment
from .remote_judge import RemoteJudgeError


class AlreadyTerminated(Exception):
    pass


@dataclass
class AssignmentRecord:
    trace_id: str
    sims: list[float]
    decision: str                 # "joined:<idx>" | "new:<idx>" | "terminated"
    effective_tau: float
    rng_draws: list[list[str]]    # sampled representative ids per cluster

    def to_json(self) -> str:
        return json.dumps(
            {
                "trace_id": self.trace_id,
                "sims": self.sims,
                "decision": self.decision,
                "effective_tau": self.effective_tau,
                "rng_draws": self.rng_draws,
            },
            sort_keys=True,
        )


@dataclass
class ClusterState:
    config: PruneConfig
    clusters: list[Cluster] = field(default_factory=list)
    segments: dict[str, Segment] = field(default_factory=dict)
    terminated: bool = False
    effective_tau: float = 0.0
    rng: np.random.Generator = None  # type: ignore[assignment]
    judge_calls: int = 0
    judge_tokens: int = 0
    records: list[AssignmentRecord] = field(default_factory=list)
    unassigned: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.effective_tau = self.config.tau
        if self.rng is None:
            self.rng = np.random.default_rng(self.config.rng_seed)

    @property
    def cluster_sizes(self) -> list[int]:
        return [len(c) for c in self.clusters]

    def assigned_ids(self) -> list[str]:
        out: list[str] = []
        for c in self.clusters:
            out.extend(c.members)
        return out

    def audit_log(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)


def _safe_score(judge: Judge, left: Segment, right: Segment) -> float:
    # Remote judge failure after retries fails open: not-equivalent.
    try:
        return judge.score(left, right)
    except RemoteJudgeError:
        return 0.0


def cluster_similarity(
    state: ClusterState,
    segment: Segment,
    cluster: Cluster,
    judge: Judge,
) -> tuple[float, list[str]]:
    """Mean judge score against p = min(K1, |cluster|) sampled members.

    Returns (similarity, sampled member ids). Sampling is uniform without
    replacement from the run's seeded RNG; the "earliest" mode takes the
    first p members instead.
    """
    if not cluster.members:
        raise ValueError("cluster must be non-empty")
    p = min(state.config.reps_per_cluster, len(cluster.members))
    if state.config.rep_selection == "earliest" or p == len(cluster.members):
        reps = list(cluster.members[:p])
    else:
        picks = state.rng.choice(len(cluster.members), size=p, replace=False)
        reps = [cluster.members[i] for i in picks]
    total = 0.0
    for rep_id in reps:
        rep = state.segments[rep_id]
        total += _safe_score(judge, segment, rep)
        state.judge_calls += 1
        state.judge_tokens += len(segment.tokens) + len(rep.tokens)
    return total / p, reps


def assign(state: ClusterState, segment: Segment, judge: Judge) -> AssignmentRecord:
    """Place one arriving segment; mutates ``state`` and returns the audit record."""
    if state.terminated:
        raise AlreadyTerminated(f"clustering already terminated (trace {segment.trace_id})")
    cfg = state.config
    tau = state.effective_tau
    sims: list[float] = []
    draws: list[list[str]] = []
    for cluster in state.clusters:
        sim, reps = cluster_similarity(state, segment, cluster, judge)
        sims.append(sim)
        draws.append(reps)

    if sims and max(sims) > tau:
        best = sims.index(max(sims))  # ties -> lowest cluster index
        state.clusters[best].members.append(segment.trace_id)
        state.segments[segment.trace_id] = segment
        decision = f"joined:{best}"
    elif len(state.clusters) < cfg.max_clusters:
        idx = len(state.clusters)
        state.clusters.append(Cluster(cluster_id=idx, members=[segment.trace_id]))
        state.segments[segment.trace_id] = segment
        decision = f"new:{idx}"
    else:
        state.terminated = True
        state.unassigned.append(segment.trace_id)
        decision = "terminated"

    record = AssignmentRecord(segment.trace_id, sims, decision, tau, draws)
    state.records.append(record)

    at = cfg.adaptive_threshold
    if at is not None and not state.terminated and len(state.clusters) > at.trigger_clusters:
        state.effective_tau = min(state.effective_tau + at.step, at.cap)
    return record


def run_clustering(
    segments: Sequence[Segment],
    judge: Judge,
    config: PruneConfig,
    rng: Optional[np.random.Generator] = None,
) -> ClusterState:
    """Fold ``assign`` over segments in arrival order; stop early on termination.

    Segments arriving after termination are left unassigned (the pipeline
    halts them).
    """
    state = ClusterState(config=config, rng=rng)
    for segment in segments:
        if state.terminated:
            state.unassigned.append(segment.trace_id)
            continue
        assign(state, segment, judge)
    return state
