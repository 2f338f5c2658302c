"""Command-line surface.

Subcommands: pairs build | judge train | judge eval | run | report merge |
simulate gen.  One TOML config file feeds every subcommand; every
hyperparameter (tau, K, K1, K2, K3, k, gamma, alpha) also has a flag of the
same name that overrides the file.

Exit codes: 0 success, 1 usage, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import judge as judge_mod
from . import metrics, pairs as pairs_mod, pipeline
from .model import AdaptiveThreshold, PruneConfig, TruncationMode
from .remote_judge import RemoteJudge, RemoteJudgeConfig
from .truncation import ReasoningLexicon


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def build_prune_config(cfg: dict, args: argparse.Namespace) -> PruneConfig:
    section = dict(cfg.get("prune", {}))

    def pick(flag, key, default):
        v = getattr(args, flag, None)
        if v is not None:
            return v
        return section.get(key, default)

    kind = pick("trunc_mode", "trunc_mode", "fixed_tokens")
    default_k = 500 if kind == "fixed_tokens" else 25
    adaptive = None
    if pick("adaptive", "adaptive", False):
        at = dict(cfg.get("adaptive_threshold", {}))
        adaptive = AdaptiveThreshold(
            trigger_clusters=at.get("trigger_clusters", 16),
            step=at.get("step", 0.03),
            cap=at.get("cap", 0.9),
        )
    return PruneConfig(
        tau=float(pick("tau", "tau", 0.5)),
        max_clusters=int(pick("K", "K", 32)),
        reps_per_cluster=int(pick("K1", "K1", 10)),
        finish_budget=int(pick("K2", "K2", 10)),
        singleton_fallback=int(pick("K3", "K3", 64)),
        trunc_mode=TruncationMode(kind, int(pick("k", "k", default_k))),
        adaptive_threshold=adaptive,
        rep_selection=pick("rep_selection", "rep_selection", "random"),
        rng_seed=int(pick("seed", "seed", 0)),
    )


def load_lexicon(args: argparse.Namespace, cfg: dict) -> ReasoningLexicon:
    path = getattr(args, "lexicon", None) or cfg.get("lexicon_file")
    if path:
        return ReasoningLexicon.from_file(path)
    words = cfg.get("lexicon_words")
    if words:
        return ReasoningLexicon.from_words(words)
    return ReasoningLexicon.default()


def make_judge(spec: str, seed: int, cfg: dict):
    """Judge spec: oracle | simulated:<auroc> | feature:<model.json> | remote."""
    if spec == "oracle":
        return judge_mod.OracleJudge()
    if spec.startswith("simulated"):
        target = float(spec.split(":", 1)[1]) if ":" in spec else 0.87
        return judge_mod.SimulatedJudge(target, seed=seed)
    if spec.startswith("feature:"):
        return judge_mod.FeatureJudge.load(spec.split(":", 1)[1])
    if spec == "remote":
        endpoint = os.environ.get("PRUNER_ENDPOINT") or cfg.get("remote", {}).get("endpoint")
        if not endpoint:
            raise UsageError("remote judge needs PRUNER_ENDPOINT or [remote].endpoint")
        remote_cfg = dict(cfg.get("remote", {}))
        remote_cfg["endpoint"] = endpoint
        return RemoteJudge(RemoteJudgeConfig(**remote_cfg))
    raise UsageError(f"unknown judge spec {spec!r}")


def synthetic_spec_from_config(cfg: dict) -> pipeline.SyntheticSpec:
    section = cfg.get("synthetic")
    if not section:
        raise UsageError("config needs a [synthetic] section for the synthetic source")
    return pipeline.SyntheticSpec(
        n_traces=int(section["n_traces"]),
        answer_distribution=tuple((str(a), float(p)) for a, p in section["answers"]),
        prefix_len=pipeline.IntRange(int(section.get("prefix_lo", 40)), int(section.get("prefix_hi", 60))),
        total_len=pipeline.IntRange(int(section.get("total_lo", 400)), int(section.get("total_hi", 600))),
        seed=int(section.get("seed", 0)),
        reasoning_word_rate=float(section.get("reasoning_word_rate", 0.15)),
        answer_token_rate=float(section.get("answer_token_rate", 0.05)),
    )


# ---------------------------------------------------------------------------
# Subcommands


def cmd_pairs_build(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    lexicon = load_lexicon(args, cfg)
    kind = args.trunc_mode or "fixed_tokens"
    mode = TruncationMode(kind, args.k or (500 if kind == "fixed_tokens" else 25))
    traces_by_problem = pipeline.load_replay(args.replay)

    all_pairs = []
    by_model: dict[str, list] = {}
    for problem_id, traces in traces_by_problem.items():
        for model_name in sorted({t.model for t in traces}):
            group = [t for t in traces if t.model == model_name]
            built = pairs_mod.build_pairs(group, mode, lexicon)
            all_pairs.extend(built)
            by_model.setdefault(model_name or "all", []).extend(built)

    if args.out:
        pairs_mod.write_pairs(all_pairs, mode, args.out)

    print(f"{'Model':<32} {'Total Pairs':>12} {'Same Answer Pairs':>18} {'Similarity Ratio':>17}")
    for model_name in sorted(by_model):
        group = by_model[model_name]
        same = sum(p.label for p in group)
        ratio = f"{same / len(group):.4f}" if group else "-"
        print(f"{model_name:<32} {len(group):>12} {same:>18} {ratio:>17}")
    total = len(all_pairs)
    same = sum(p.label for p in all_pairs)
    avg = f"{same / total:.4f}" if total else "-"
    print(f"{'Average':<32} {total:>12} {same:>18} {avg:>17}")
    if total == 0:
        print("warning: no pairs produced", file=sys.stderr)
    return 0


def cmd_judge_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    lexicon = load_lexicon(args, cfg)
    pairs = pairs_mod.read_pairs(args.pairs)
    params = judge_mod.FocalLossParams(gamma=args.gamma, alpha=args.alpha)
    trained = judge_mod.train_feature_judge(
        pairs, lexicon, params,
        oversample_factor=args.oversample, epochs=args.epochs, lr=args.lr, seed=args.seed or 0,
    )
    trained.save(args.out)
    print(f"trained feature judge on {len(pairs)} pairs -> {args.out}")
    return 0


def _score_pairs(judge_spec: str, pairs, seed: int, cfg: dict) -> list[float]:
    if judge_spec == "oracle":
        # Labels are the ground truth for stored pair files.
        return [float(p.label) for p in pairs]
    if judge_spec.startswith("simulated"):
        target = float(judge_spec.split(":", 1)[1]) if ":" in judge_spec else 0.87
        return [
            judge_mod.simulated_score(p.label, seed, p.source_trace_ids, target) for p in pairs
        ]
    j = make_judge(judge_spec, seed, cfg)
    if isinstance(j, judge_mod.FeatureJudge):
        return [j.score_segments(p.left, p.right) for p in pairs]
    if isinstance(j, RemoteJudge):
        return [j.score_text(" ".join(p.left), " ".join(p.right)) for p in pairs]
    raise UsageError(f"judge spec {judge_spec!r} cannot score stored pairs")


def cmd_judge_eval(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    print(f"{'Pair Set':<40} {'AUROC':>8} {'TNR@0.2':>8}")
    for path in args.pairs:
        pairs = pairs_mod.read_pairs(path)
        labels = [p.label for p in pairs]
        if not labels or min(labels) == max(labels):
            raise judge_mod.SingleClassDataset(f"{path}: needs both labels")
        scores = _score_pairs(args.judge, pairs, args.seed or 0, cfg)
        a = metrics.auroc(scores, labels)
        tnr, _thr = metrics.tnr_at_fnr(scores, labels, 0.2)
        print(f"{Path(path).name:<40} {a:>8.4f} {tnr:>8.4f}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    prune_cfg = build_prune_config(cfg, args)
    lexicon = load_lexicon(args, cfg)
    judge = make_judge(args.judge, prune_cfg.rng_seed, cfg)

    if args.source.startswith("replay:"):
        source = pipeline.ReplaySource.from_file(args.source.split(":", 1)[1])
        if args.problems:
            problems = pipeline.load_problems(args.problems)
        else:
            problems = [pipeline.Problem(pid) for pid in source.problems()]
    elif args.source == "synthetic":
        spec = synthetic_spec_from_config(cfg)
        source = pipeline.SyntheticSource(spec, lexicon)
        gold = max(spec.answer_distribution, key=lambda ap: ap[1])[0]
        count = args.n_problems or int(cfg.get("run", {}).get("n_problems", 10))
        problems = [pipeline.Problem(f"synthetic-{i:04d}", gold_answer=gold) for i in range(count)]
    elif args.source == "remote":
        remote = cfg.get("generation", {})
        endpoint = os.environ.get("PRUNER_ENDPOINT") or remote.get("endpoint")
        if not endpoint or not args.problems:
            raise UsageError("remote source needs an endpoint and --problems")
        source = pipeline.RemoteSource(endpoint, remote.get("model", ""),
                                       float(remote.get("temperature", 1.0)))
        problems = pipeline.load_problems(args.problems)
    else:
        raise UsageError(f"unknown source {args.source!r}")

    n = args.n or int(cfg.get("run", {}).get("n_traces", 16))
    event_log = pipeline.EventLog() if args.events else None
    report = pipeline.run_benchmark(
        problems, source, judge, prune_cfg, n,
        baseline_tokens=args.baseline, lexicon=lexicon,
        eval_mode=args.eval_mode, event_log=event_log,
    )
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    if args.csv:
        metrics.report_to_csv(report, args.csv)
    if event_log and args.events:
        event_log.write(args.events)
    acc = "-" if report.accuracy is None else f"{report.accuracy:.3f}"
    delta = "-" if report.delta_token_pct is None else f"{report.delta_token_pct:.1f}%"
    print(f"problems={len(report.problems)} accuracy={acc} tokens={report.total_tokens} "
          f"judge_calls={report.total_judge_calls} judge_tokens={report.total_judge_tokens} "
          f"delta_token_pct={delta}")
    return 0


def cmd_report_merge(args: argparse.Namespace) -> int:
    total_tokens = 0
    judge_calls = 0
    judge_tokens = 0
    n_correct = 0
    n_scored = 0
    n_problems = 0
    baseline = 0.0
    have_baseline = True
    for path in args.reports:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        total_tokens += d["total_tokens"]
        judge_calls += d["total_judge_calls"]
        judge_tokens += d["total_judge_tokens"]
        n_problems += len(d["problems"])
        for p in d["problems"]:
            if p["correct"] is not None:
                n_scored += 1
                n_correct += bool(p["correct"])
        if d.get("baseline_tokens") is None:
            have_baseline = False
        else:
            baseline += d["baseline_tokens"]
    merged = {
        "total_tokens": total_tokens,
        "total_judge_calls": judge_calls,
        "total_judge_tokens": judge_tokens,
        "n_problems": n_problems,
        "accuracy": (n_correct / n_scored) if n_scored else None,
        "baseline_tokens": baseline if have_baseline else None,
        "delta_token_pct": (
            metrics.delta_token_pct(total_tokens, baseline) if have_baseline and baseline else None
        ),
    }
    out = json.dumps(merged, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    print(out)
    return 0


def cmd_simulate_gen(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    spec = synthetic_spec_from_config(cfg)
    lexicon = load_lexicon(args, cfg)
    gold = max(spec.answer_distribution, key=lambda ap: ap[1])[0]
    traces = []
    problems = []
    for i in range(args.n_problems):
        pid = f"synthetic-{i:04d}"
        traces.extend(pipeline.generate_synthetic(spec, pid, lexicon))
        problems.append({"problem_id": pid, "question": "", "gold_answer": gold})
    pipeline.write_replay(traces, args.out)
    if args.problems_out:
        with open(args.problems_out, "w", encoding="utf-8") as fh:
            for p in problems:
                fh.write(json.dumps(p, sort_keys=True) + "\n")
    print(f"wrote {len(traces)} traces for {args.n_problems} problems -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--seed", type=int, default=None, help="RNG seed")
    p.add_argument("--lexicon", help="reasoning-word lexicon file, one word per line")


def build_parser() -> _Parser:
    parser = _Parser(prog="tracepruner", description=__doc__)
    top = parser.add_subparsers(dest="group", required=True)

    pairs_p = top.add_parser("pairs").add_subparsers(dest="command", required=True)
    pb = pairs_p.add_parser("build")
    _add_common(pb)
    pb.add_argument("--replay", required=True)
    pb.add_argument("--out")
    pb.add_argument("--trunc-mode", choices=["fixed_tokens", "reasoning_words"], dest="trunc_mode")
    pb.add_argument("--k", type=int)
    pb.set_defaults(func=cmd_pairs_build)

    judge_p = top.add_parser("judge").add_subparsers(dest="command", required=True)
    jt = judge_p.add_parser("train")
    _add_common(jt)
    jt.add_argument("--pairs", required=True)
    jt.add_argument("--out", required=True)
    jt.add_argument("--gamma", type=float, default=2.0)
    jt.add_argument("--alpha", type=float, default=0.5)
    jt.add_argument("--oversample", type=int, default=2)
    jt.add_argument("--epochs", type=int, default=200)
    jt.add_argument("--lr", type=float, default=1.0)
    jt.set_defaults(func=cmd_judge_train)

    je = judge_p.add_parser("eval")
    _add_common(je)
    je.add_argument("--pairs", nargs="+", required=True)
    je.add_argument("--judge", default="oracle")
    je.set_defaults(func=cmd_judge_eval)

    run = top.add_parser("run")
    _add_common(run)
    run.add_argument("--source", required=True, help="replay:<file> | synthetic | remote")
    run.add_argument("--judge", default="oracle")
    run.add_argument("--problems", help="problems JSONL (replay/remote sources)")
    run.add_argument("--n", type=int, help="parallel traces per problem")
    run.add_argument("--n-problems", type=int, dest="n_problems")
    run.add_argument("--baseline", type=float, help="cons@N baseline token total")
    run.add_argument("--out", help="JSON report path")
    run.add_argument("--csv", help="CSV summary path")
    run.add_argument("--events", help="event-log JSONL path")
    run.add_argument("--eval-mode", action="store_true", dest="eval_mode",
                     help="resume one representative per cluster for pass@k")
    run.add_argument("--tau", type=float)
    run.add_argument("--K", type=int)
    run.add_argument("--K1", type=int)
    run.add_argument("--K2", type=int)
    run.add_argument("--K3", type=int)
    run.add_argument("--k", type=int)
    run.add_argument("--trunc-mode", choices=["fixed_tokens", "reasoning_words"], dest="trunc_mode")
    run.add_argument("--adaptive", action="store_true", default=None)
    run.add_argument("--rep-selection", choices=["random", "earliest"], dest="rep_selection")
    run.set_defaults(func=cmd_run)

    report_p = top.add_parser("report").add_subparsers(dest="command", required=True)
    rm = report_p.add_parser("merge")
    rm.add_argument("reports", nargs="+")
    rm.add_argument("--out")
    rm.set_defaults(func=cmd_report_merge)

    sim_p = top.add_parser("simulate").add_subparsers(dest="command", required=True)
    sg = sim_p.add_parser("gen")
    _add_common(sg)
    sg.add_argument("--out", required=True)
    sg.add_argument("--problems-out", dest="problems_out")
    sg.add_argument("--n-problems", type=int, default=1, dest="n_problems")
    sg.set_defaults(func=cmd_simulate_gen)

    return parser


DATA_ERRORS = (
    FileNotFoundError,
    pipeline.SchemaError,
    pipeline.InvalidDistribution,
    pipeline.SourceExhausted,
    judge_mod.SingleClassDataset,
    pairs_mod.EmptyPairSet,
    metrics.SingleClass,
    metrics.ZeroBaseline,
)


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
