"""End-to-end online phase.

Streams n parallel traces to their pause point, clusters the paused
segments, resumes only the selected finishers, majority-votes their answers,
and accounts every generated token.  Sources are pluggable: replay files,
a synthetic generator, or a live chat-completions backend.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np

from .answers import reward
from .clustering import run_clustering
from .judge import Judge
from .metrics import delta_token_pct
from .model import (
    BenchmarkReport,
    ProblemReport,
    PruneConfig,
    Segment,
    Trace,
    TraceState,
    tokenize,
    transition,
)
from .truncation import ReasoningLexicon, pause_index


class SourceExhausted(Exception):
    pass


class SchemaError(Exception):
    def __init__(self, path: str, line_no: int, message: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class InvalidDistribution(Exception):
    pass


# ---------------------------------------------------------------------------
# Recorded traces and replay files


@dataclass(frozen=True)
class RecordedTrace:
    problem_id: str
    trace_id: str
    tokens: tuple[str, ...]
    final_answer: str
    total_tokens: int
    model: str = ""

    def to_dict(self) -> dict:
        d = {
            "problem_id": self.problem_id,
            "trace_id": self.trace_id,
            "tokens": list(self.tokens),
            "final_answer": self.final_answer,
            "total_tokens": self.total_tokens,
        }
        if self.model:
            d["model"] = self.model
        return d


@dataclass(frozen=True)
class Problem:
    problem_id: str
    question: str = ""
    gold_answer: Optional[str] = None


def load_replay(path: str | Path) -> dict[str, list[RecordedTrace]]:
    """Replay JSONL -> traces grouped by problem_id, file order preserved."""
    out: dict[str, list[RecordedTrace]] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(str(path), line_no, f"invalid JSON: {exc}")
        try:
            if "tokens" in rec:
                tokens = tuple(str(t) for t in rec["tokens"])
            else:
                tokens = tokenize(rec["text"])
            trace = RecordedTrace(
                problem_id=str(rec["problem_id"]),
                trace_id=str(rec["trace_id"]),
                tokens=tokens,
                final_answer=str(rec["final_answer"]),
                total_tokens=int(rec.get("total_tokens", len(tokens))),
                model=str(rec.get("model", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(str(path), line_no, f"bad trace record: {exc!r}")
        out.setdefault(trace.problem_id, []).append(trace)
    return out


def write_replay(traces: Iterable[RecordedTrace], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")


def load_problems(path: str | Path) -> list[Problem]:
    out = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append(
                Problem(
                    problem_id=str(rec["problem_id"]),
                    question=str(rec.get("question", "")),
                    gold_answer=None if rec.get("gold_answer") is None else str(rec["gold_answer"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SchemaError(str(path), line_no, f"bad problem record: {exc!r}")
    return out


# ---------------------------------------------------------------------------
# Synthetic generation


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 1 or self.hi < self.lo:
            raise InvalidDistribution(f"bad integer range [{self.lo}, {self.hi}]")

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))


_FILLER_VOCAB = tuple(
    f"w{i}" for i in range(40)
) + ("compute", "value", "step", "equation", "term", "sum", "let", "x", "y", "result")


@dataclass(frozen=True)
class SyntheticSpec:
    n_traces: int
    answer_distribution: tuple[tuple[str, float], ...]
    prefix_len: IntRange = IntRange(40, 60)
    total_len: IntRange = IntRange(400, 600)
    seed: int = 0
    reasoning_word_rate: float = 0.15
    answer_token_rate: float = 0.05

    def __post_init__(self):
        if self.n_traces < 1:
            raise InvalidDistribution("n_traces must be >= 1")
        probs = [p for _, p in self.answer_distribution]
        if not probs or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
            raise InvalidDistribution("answer probabilities must be non-negative and sum to 1")


def generate_synthetic(
    spec: SyntheticSpec,
    problem_id: str = "synthetic-0",
    lexicon: Optional[ReasoningLexicon] = None,
) -> list[RecordedTrace]:
    """Deterministic synthetic trace set: answers drawn from the configured
    distribution, filler text interleaved with reasoning-marker words."""
    lexicon = lexicon or ReasoningLexicon.default()
    markers = sorted(lexicon.words)
    rng = np.random.default_rng([spec.seed, _stable_int(problem_id)])
    answers = [a for a, _ in spec.answer_distribution]
    probs = np.array([p for _, p in spec.answer_distribution])
    probs = probs / probs.sum()
    traces = []
    for i in range(spec.n_traces):
        answer = answers[int(rng.choice(len(answers), p=probs))]
        prefix = spec.prefix_len.sample(rng)
        total = max(spec.total_len.sample(rng), prefix)
        body = rng.choice(len(_FILLER_VOCAB), size=total)
        kinds = rng.random(total)
        marker_picks = rng.choice(len(markers), size=total)
        tokens = []
        for j in range(total):
            if kinds[j] < spec.reasoning_word_rate:
                tokens.append(markers[marker_picks[j]])
            elif kinds[j] < spec.reasoning_word_rate + spec.answer_token_rate:
                tokens.append(str(answer))
            else:
                tokens.append(_FILLER_VOCAB[body[j]])
        traces.append(
            RecordedTrace(
                problem_id=problem_id,
                trace_id=f"{problem_id}-t{i:03d}",
                tokens=tuple(tokens),
                final_answer=str(answer),
                total_tokens=total,
            )
        )
    return traces


def _stable_int(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


# ---------------------------------------------------------------------------
# Sources


class TraceHandle(Protocol):
    trace_id: str
    answer_hint: Optional[str]

    def pause(self, kind: str, k: int, lexicon: ReasoningLexicon) -> tuple[str, ...]: ...
    def resume(self) -> tuple[int, str, int]: ...


class TraceSource(Protocol):
    def start(self, problem: Problem, n: int) -> list["TraceHandle"]: ...


class RecordedHandle:
    """Replays a recorded trace through the pause/resume streaming contract."""

    def __init__(self, trace: RecordedTrace):
        self._trace = trace
        self.trace_id = trace.trace_id
        self.answer_hint: Optional[str] = trace.final_answer
        self._prefix_len = 0

    def pause(self, kind: str, k: int, lexicon: ReasoningLexicon) -> tuple[str, ...]:
        self._prefix_len = pause_index(self._trace.tokens, kind, k, lexicon)
        return self._trace.tokens[: self._prefix_len]

    def resume(self) -> tuple[int, str, int]:
        total = self._trace.total_tokens
        return total - self._prefix_len, self._trace.final_answer, total


class ReplaySource:
    def __init__(self, traces_by_problem: dict[str, list[RecordedTrace]]):
        self._traces = traces_by_problem

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplaySource":
        return cls(load_replay(path))

    def problems(self) -> list[str]:
        return list(self._traces)

    def start(self, problem: Problem, n: int) -> list[RecordedHandle]:
        traces = self._traces.get(problem.problem_id, [])
        if len(traces) < n:
            raise SourceExhausted(
                f"problem {problem.problem_id}: have {len(traces)} traces, need {n}"
            )
        return [RecordedHandle(t) for t in traces[:n]]


class SyntheticSource:
    """Generates a fresh deterministic trace set per problem."""

    def __init__(self, spec: SyntheticSpec, lexicon: Optional[ReasoningLexicon] = None):
        self.spec = spec
        self.lexicon = lexicon

    def start(self, problem: Problem, n: int) -> list[RecordedHandle]:
        if n > self.spec.n_traces:
            raise SourceExhausted(f"spec provides {self.spec.n_traces} traces, need {n}")
        traces = generate_synthetic(self.spec, problem.problem_id, self.lexicon)
        return [RecordedHandle(t) for t in traces[:n]]


_BOXED_RE = re.compile(r"\\boxed\{([^{}]*)\}")


class RemoteHandle:
    """Live trace over a chat-completions backend.

    Pause generates up to the truncation budget; resume regenerates with the
    prefix as context and counts only newly emitted tokens.
    """

    def __init__(self, source: "RemoteSource", problem: Problem, trace_id: str):
        self._source = source
        self._problem = problem
        self.trace_id = trace_id
        self.answer_hint: Optional[str] = None
        self._prefix: tuple[str, ...] = ()

    def pause(self, kind: str, k: int, lexicon: ReasoningLexicon) -> tuple[str, ...]:
        # The API budget is in model tokens; whitespace tokens approximate it.
        budget = k if kind == "fixed_tokens" else k * 30
        text = self._source.complete(self._problem.question, prefix=None, max_tokens=budget)
        tokens = tokenize(text)
        cut = pause_index(tokens, kind, k, lexicon)
        self._prefix = tokens[:cut]
        return self._prefix

    def resume(self) -> tuple[int, str, int]:
        prefix_text = " ".join(self._prefix)
        text = self._source.complete(self._problem.question, prefix=prefix_text, max_tokens=None)
        new_tokens = tokenize(text)
        m = _BOXED_RE.search(text)
        answer = m.group(1) if m else (new_tokens[-1] if new_tokens else "")
        total = len(self._prefix) + len(new_tokens)
        return len(new_tokens), answer, total


class RemoteSource:
    """OpenAI-chat-compatible generation source. Excluded from acceptance tests."""

    def __init__(self, endpoint: str, model: str, temperature: float = 1.0,
                 timeout_s: float = 120.0, session=None):
        import requests

        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def complete(self, question: str, prefix: Optional[str], max_tokens: Optional[int]) -> str:
        messages = [{"role": "user", "content": question}]
        if prefix:
            messages.append({"role": "assistant", "content": prefix})
            messages.append({"role": "user", "content": "Continue the reasoning and finish."})
        payload: dict = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        }
        if max_tokens is not None:
            payload["max_tokens"] = max_tokens
        resp = self.session.post(self.endpoint, json=payload, timeout=self.timeout_s)
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]

    def start(self, problem: Problem, n: int) -> list[RemoteHandle]:
        return [RemoteHandle(self, problem, f"{problem.problem_id}-r{i:03d}") for i in range(n)]


# ---------------------------------------------------------------------------
# The online phase


EventSink = Callable[[dict], None]


@dataclass
class EventLog:
    """Deterministic JSONL event ledger with logical timestamps."""

    events: list[dict] = field(default_factory=list)
    _ts: int = 0

    def emit(self, trace_id: str, event: str, token_delta: int) -> None:
        self._ts += 1
        self.events.append(
            {"ts": self._ts, "trace_id": trace_id, "event": event, "token_delta": token_delta}
        )

    def dump(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dump(), encoding="utf-8")


def run_problem(
    problem: Problem,
    source: TraceSource,
    judge: Judge,
    config: PruneConfig,
    n: int,
    lexicon: Optional[ReasoningLexicon] = None,
    eval_mode: bool = False,
    event_log: Optional[EventLog] = None,
    audit_sink: Optional[Callable[[str], None]] = None,
) -> ProblemReport:
    """One problem end to end: pause, cluster, resume finishers, vote."""
    lexicon = lexicon or ReasoningLexicon.default()
    report = ProblemReport(problem_id=problem.problem_id, n_traces=n)
    handles = source.start(problem, n)
    rng = np.random.default_rng([config.rng_seed, _stable_int(problem.problem_id)])

    # Phase 1: stream every trace to its pause point.
    paused: dict[str, Trace] = {}
    prefixes: dict[str, tuple[str, ...]] = {}
    hints: dict[str, Optional[str]] = {}
    for h in handles:
        prefix = h.pause(config.trunc_mode.kind, config.trunc_mode.k, lexicon)
        trace = Trace(trace_id=h.trace_id, problem_id=problem.problem_id,
                      tokens=prefix, prefix_len=len(prefix))
        paused[h.trace_id] = transition(trace, TraceState.PAUSED)
        prefixes[h.trace_id] = prefix
        hints[h.trace_id] = h.answer_hint
        report.tokens_consumed += len(prefix)
        if event_log:
            event_log.emit(h.trace_id, "pause", len(prefix))

    # Pause-completion order: shorter prefixes pause first; ties by trace_id.
    arrival = sorted(handles, key=lambda h: (len(prefixes[h.trace_id]), h.trace_id))
    segments = [
        Segment(h.trace_id, prefixes[h.trace_id], answer_hint=hints[h.trace_id]) for h in arrival
    ]

    # Phase 2: greedy clustering over the paused segments.
    state = run_clustering(segments, judge, config, rng=rng)
    report.judge_calls = state.judge_calls
    report.judge_tokens = state.judge_tokens
    report.cluster_sizes = state.cluster_sizes
    if audit_sink:
        audit_sink(state.audit_log())

    # Phase 3: resume the finishers, halt everything else.
    from .voting import majority_vote, select_finishers

    eligible = state.assigned_ids()
    finishers = select_finishers(state, eligible, rng=rng)
    finisher_set = set(finishers)
    report.n_finishers = len(finishers)
    by_id = {h.trace_id: h for h in handles}
    answers: dict[str, str] = {}
    for tid in finishers:
        post, answer, total = by_id[tid].resume()
        answers[tid] = answer
        report.tokens_consumed += post
        trace = transition(paused[tid], TraceState.RESUMED)
        paused[tid] = transition(trace, TraceState.FINISHED,
                                 final_answer=answer, total_tokens=total)
        if event_log:
            event_log.emit(tid, "resume", post)
    for h in handles:
        if h.trace_id not in finisher_set:
            paused[h.trace_id] = transition(paused[h.trace_id], TraceState.HALTED)
            report.n_halted += 1
            if event_log:
                event_log.emit(h.trace_id, "halt", 0)

    # Phase 4: majority vote over the finished answers.
    voted, tally = majority_vote([answers[t] for t in finishers])
    report.voted_answer = voted
    report.vote_tally = tally
    if problem.gold_answer is not None:
        report.correct = reward(voted, problem.gold_answer) == 1

    # Evaluation mode: resume one representative per cluster for cluster-level
    # pass@k; their extra tokens are accounted separately.
    if eval_mode and problem.gold_answer is not None:
        rep_answers = []
        for cluster in state.clusters:
            rep_id = cluster.members[0]
            if rep_id in answers:
                rep_answers.append(answers[rep_id])
            else:
                post, answer, _total = by_id[rep_id].resume()
                rep_answers.append(answer)
                report.eval_rep_tokens += post
        report.pass_at_k = any(reward(a, problem.gold_answer) == 1 for a in rep_answers)
    return report


def run_benchmark(
    problems: Sequence[Problem],
    source: TraceSource,
    judge: Judge,
    config: PruneConfig,
    n: int,
    baseline_tokens: Optional[float] = None,
    lexicon: Optional[ReasoningLexicon] = None,
    eval_mode: bool = False,
    event_log: Optional[EventLog] = None,
) -> BenchmarkReport:
    report = BenchmarkReport(baseline_tokens=baseline_tokens)
    for problem in problems:
        pr = run_problem(problem, source, judge, config, n, lexicon=lexicon,
                         eval_mode=eval_mode, event_log=event_log)
        report.problems.append(pr)
        report.total_tokens += pr.tokens_consumed
        report.total_judge_calls += pr.judge_calls
        report.total_judge_tokens += pr.judge_tokens
    scored = [p for p in report.problems if p.correct is not None]
    if scored:
        report.accuracy = sum(p.correct for p in scored) / len(scored)
    if baseline_tokens is not None:
        report.delta_token_pct = delta_token_pct(report.total_tokens, baseline_tokens)
    return report
