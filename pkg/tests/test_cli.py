import argparse
import json

import pytest

from tracepruner.cli import build_parser, build_prune_config, main, make_judge, UsageError
from tracepruner.judge import OracleJudge, SimulatedJudge
from tracepruner.model import TruncationMode
from tracepruner.pairs import read_pairs, write_pairs
from tracepruner.pipeline import RecordedTrace, write_replay

from conftest import make_feature_corpus


def write_small_replay(path, answers=("7", "7", "7", "3"), pid="p0", total=30, model=""):
    traces = [
        RecordedTrace(
            problem_id=pid,
            trace_id=f"{pid}-t{i:03d}",
            tokens=tuple(f"tok{j}" for j in range(total)),
            final_answer=a,
            total_tokens=total,
            model=model,
        )
        for i, a in enumerate(answers)
    ]
    write_replay(traces, path)
    return traces


class TestConfig:
    def test_defaults(self):
        cfg = build_prune_config({}, argparse.Namespace())
        assert cfg.tau == 0.5
        assert cfg.max_clusters == 32
        assert cfg.reps_per_cluster == 10
        assert cfg.finish_budget == 10
        assert cfg.singleton_fallback == 64
        assert cfg.trunc_mode == TruncationMode("fixed_tokens", 500)
        assert cfg.adaptive_threshold is None

    def test_file_values(self):
        file_cfg = {"prune": {"tau": 0.6, "K": 8, "trunc_mode": "reasoning_words"}}
        cfg = build_prune_config(file_cfg, argparse.Namespace())
        assert cfg.tau == 0.6 and cfg.max_clusters == 8
        assert cfg.trunc_mode == TruncationMode("reasoning_words", 25)

    def test_flags_override_file(self):
        file_cfg = {"prune": {"tau": 0.6}}
        ns = argparse.Namespace(tau=0.7, K2=4)
        cfg = build_prune_config(file_cfg, ns)
        assert cfg.tau == 0.7 and cfg.finish_budget == 4

    def test_adaptive_section(self):
        file_cfg = {"prune": {"adaptive": True}, "adaptive_threshold": {"step": 0.05}}
        cfg = build_prune_config(file_cfg, argparse.Namespace())
        at = cfg.adaptive_threshold
        assert at is not None and (at.trigger_clusters, at.step, at.cap) == (16, 0.05, 0.9)


class TestMakeJudge:
    def test_specs(self):
        assert isinstance(make_judge("oracle", 0, {}), OracleJudge)
        sim = make_judge("simulated:0.75", 3, {})
        assert isinstance(sim, SimulatedJudge)
        with pytest.raises(UsageError):
            make_judge("nonsense", 0, {})

    def test_remote_needs_endpoint(self, monkeypatch):
        monkeypatch.delenv("PRUNER_ENDPOINT", raising=False)
        with pytest.raises(UsageError):
            make_judge("remote", 0, {})


class TestPairsBuild:
    def test_table_and_file(self, tmp_path, capsys):
        replay = tmp_path / "replay.jsonl"
        write_small_replay(replay)
        out = tmp_path / "pairs.jsonl"
        rc = main(["pairs", "build", "--replay", str(replay), "--out", str(out), "--k", "5"])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "Similarity Ratio" in printed
        assert "0.5000" in printed  # 3 of C(4,2)=6 pairs agree
        pairs = read_pairs(out)
        assert len(pairs) == 6
        assert sum(p.label for p in pairs) == 3

    def test_empty_replay_warns_but_succeeds(self, tmp_path, capsys):
        replay = tmp_path / "replay.jsonl"
        replay.write_text("")
        rc = main(["pairs", "build", "--replay", str(replay)])
        assert rc == 0
        assert "no pairs" in capsys.readouterr().err

    def test_missing_replay_is_data_error(self, tmp_path):
        rc = main(["pairs", "build", "--replay", str(tmp_path / "nope.jsonl")])
        assert rc == 2


class TestJudgeTrainEval:
    def test_train_then_eval(self, tmp_path, capsys):
        pairs = make_feature_corpus(400, 0.8, seed=0)
        pair_file = tmp_path / "pairs.jsonl"
        write_pairs(pairs, TruncationMode("fixed_tokens", 500), pair_file)
        model = tmp_path / "judge.json"

        rc = main(["judge", "train", "--pairs", str(pair_file), "--out", str(model),
                   "--epochs", "100"])
        assert rc == 0 and model.exists()

        rc = main(["judge", "eval", "--pairs", str(pair_file),
                   "--judge", f"feature:{model}"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "AUROC" in out and "pairs.jsonl" in out

    def test_eval_oracle_is_perfect(self, tmp_path, capsys):
        pairs = make_feature_corpus(60, 0.5, seed=1)
        pair_file = tmp_path / "pairs.jsonl"
        write_pairs(pairs, TruncationMode("fixed_tokens", 500), pair_file)
        rc = main(["judge", "eval", "--pairs", str(pair_file), "--judge", "oracle"])
        assert rc == 0
        assert "1.0000" in capsys.readouterr().out

    def test_single_class_pairs_rejected(self, tmp_path):
        pairs = make_feature_corpus(40, 1.0, seed=2)
        pair_file = tmp_path / "pairs.jsonl"
        write_pairs(pairs, TruncationMode("fixed_tokens", 500), pair_file)
        rc = main(["judge", "eval", "--pairs", str(pair_file)])
        assert rc == 2


class TestRun:
    def test_replay_run_writes_artifacts(self, tmp_path, capsys):
        replay = tmp_path / "replay.jsonl"
        write_small_replay(replay)
        problems = tmp_path / "problems.jsonl"
        problems.write_text('{"problem_id": "p0", "gold_answer": "7"}\n')
        out = tmp_path / "report.json"
        csv = tmp_path / "report.csv"
        events = tmp_path / "events.jsonl"
        rc = main(["run", "--source", f"replay:{replay}", "--judge", "oracle",
                   "--problems", str(problems), "--n", "4", "--k", "10", "--K2", "2",
                   "--baseline", "120", "--out", str(out), "--csv", str(csv),
                   "--events", str(events)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert report["accuracy"] == 1.0
        assert report["total_tokens"] == 4 * 10 + 2 * 20
        assert report["delta_token_pct"] == pytest.approx((80 - 120) / 120 * 100)
        assert csv.read_text().startswith("problem_id,")
        assert all(json.loads(x) for x in events.read_text().splitlines())
        assert "accuracy=1.000" in capsys.readouterr().out

    def test_synthetic_run_from_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(
            "[synthetic]\n"
            "n_traces = 8\n"
            'answers = [["7", 0.8], ["3", 0.2]]\n'
            "prefix_lo = 4\nprefix_hi = 6\ntotal_lo = 10\ntotal_hi = 15\n"
            "seed = 1\n"
            "[run]\nn_problems = 3\nn_traces = 8\n"
        )
        rc = main(["run", "--source", "synthetic", "--config", str(cfg),
                   "--judge", "oracle", "--k", "4"])
        assert rc == 0
        assert "problems=3" in capsys.readouterr().out

    def test_unknown_source_usage_error(self):
        assert main(["run", "--source", "teapot"]) == 1

    def test_bad_replay_schema(self, tmp_path):
        replay = tmp_path / "replay.jsonl"
        replay.write_text("{broken\n")
        assert main(["run", "--source", f"replay:{replay}"]) == 2


class TestReportMerge:
    def _make_report(self, tmp_path, name, answers, gold):
        replay = tmp_path / f"{name}.replay.jsonl"
        write_small_replay(replay, answers=answers, pid=name)
        problems = tmp_path / f"{name}.problems.jsonl"
        problems.write_text(json.dumps({"problem_id": name, "gold_answer": gold}) + "\n")
        out = tmp_path / f"{name}.json"
        rc = main(["run", "--source", f"replay:{replay}", "--problems", str(problems),
                   "--n", "4", "--k", "10", "--K2", "2", "--baseline", "120",
                   "--out", str(out)])
        assert rc == 0
        return out

    def test_merge_totals(self, tmp_path, capsys):
        r1 = self._make_report(tmp_path, "a", ("7", "7", "7", "3"), "7")
        r2 = self._make_report(tmp_path, "b", ("1", "1", "2", "2"), "9")
        merged_path = tmp_path / "merged.json"
        rc = main(["report", "merge", str(r1), str(r2), "--out", str(merged_path)])
        assert rc == 0
        merged = json.loads(merged_path.read_text())
        assert merged["n_problems"] == 2
        assert merged["accuracy"] == 0.5
        assert merged["total_tokens"] == (
            json.loads(r1.read_text())["total_tokens"]
            + json.loads(r2.read_text())["total_tokens"]
        )
        assert merged["baseline_tokens"] == 240


class TestSimulateGen:
    def test_writes_replay_and_problems(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(
            "[synthetic]\n"
            "n_traces = 4\n"
            'answers = [["7", 1.0]]\n'
            "prefix_lo = 3\nprefix_hi = 4\ntotal_lo = 6\ntotal_hi = 8\n"
        )
        out = tmp_path / "replay.jsonl"
        pout = tmp_path / "problems.jsonl"
        rc = main(["simulate", "gen", "--config", str(cfg), "--out", str(out),
                   "--problems-out", str(pout), "--n-problems", "2"])
        assert rc == 0
        assert len(out.read_text().splitlines()) == 8
        probs = [json.loads(x) for x in pout.read_text().splitlines()]
        assert [p["problem_id"] for p in probs] == ["synthetic-0000", "synthetic-0001"]
        assert all(p["gold_answer"] == "7" for p in probs)

    def test_generated_replay_feeds_run(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text(
            "[synthetic]\n"
            "n_traces = 6\n"
            'answers = [["5", 0.7], ["2", 0.3]]\n'
            "prefix_lo = 3\nprefix_hi = 5\ntotal_lo = 8\ntotal_hi = 12\n"
        )
        out = tmp_path / "replay.jsonl"
        pout = tmp_path / "problems.jsonl"
        assert main(["simulate", "gen", "--config", str(cfg), "--out", str(out),
                     "--problems-out", str(pout), "--n-problems", "2"]) == 0
        rc = main(["run", "--source", f"replay:{out}", "--problems", str(pout),
                   "--n", "6", "--k", "3"])
        assert rc == 0
        assert "problems=2" in capsys.readouterr().out


def test_parser_rejects_missing_subcommand():
    with pytest.raises(UsageError):
        build_parser().parse_args([])
