import pytest

from tracepruner.model import (
    Cluster,
    IllegalTransition,
    PruneConfig,
    Trace,
    TraceState,
    TruncationMode,
    check_partition,
    tokenize,
    transition,
)


def make_trace(**kw):
    defaults = dict(trace_id="t1", problem_id="p1", tokens=("a", "b"), prefix_len=2)
    defaults.update(kw)
    return Trace(**defaults)


class TestTransitions:
    def test_generating_to_paused(self):
        t = transition(make_trace(), TraceState.PAUSED)
        assert t.state is TraceState.PAUSED

    def test_paused_to_finished_rejected(self):
        t = transition(make_trace(), TraceState.PAUSED)
        with pytest.raises(IllegalTransition):
            transition(t, TraceState.FINISHED, final_answer="42", total_tokens=2)

    def test_halt_is_terminal(self):
        t = transition(make_trace(), TraceState.PAUSED)
        t = transition(t, TraceState.HALTED)
        with pytest.raises(IllegalTransition):
            transition(t, TraceState.RESUMED)

    def test_full_lifecycle(self):
        t = make_trace()
        for state in (TraceState.PAUSED, TraceState.RESUMED):
            t = transition(t, state)
        t = transition(t, TraceState.FINISHED, final_answer="42", total_tokens=5)
        assert t.final_answer == "42"
        assert t.total_tokens == 5

    def test_original_is_unchanged(self):
        t = make_trace()
        transition(t, TraceState.PAUSED)
        assert t.state is TraceState.GENERATING


class TestTraceInvariants:
    def test_final_answer_requires_finished(self):
        with pytest.raises(ValueError):
            make_trace(final_answer="42")

    def test_finished_requires_answer(self):
        with pytest.raises(ValueError):
            make_trace(state=TraceState.FINISHED, total_tokens=2)

    def test_prefix_exceeding_total_rejected_when_finished(self):
        with pytest.raises(ValueError):
            make_trace(state=TraceState.FINISHED, final_answer="x", prefix_len=5, total_tokens=2)


class TestPruneConfig:
    def test_defaults(self):
        cfg = PruneConfig()
        assert cfg.tau == 0.5
        assert cfg.max_clusters == 32
        assert cfg.reps_per_cluster == 10
        assert cfg.finish_budget == 10
        assert cfg.singleton_fallback == 64
        assert cfg.trunc_mode == TruncationMode("fixed_tokens", 500)

    def test_roundtrip(self):
        cfg = PruneConfig()
        assert PruneConfig.from_dict(cfg.to_dict()) == cfg

    def test_roundtrip_with_adaptive(self):
        from tracepruner.model import AdaptiveThreshold

        cfg = PruneConfig(adaptive_threshold=AdaptiveThreshold(8, 0.05, 0.8),
                          trunc_mode=TruncationMode("reasoning_words", 25))
        assert PruneConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize("kw", [
        {"tau": 1.5},
        {"max_clusters": 0},
        {"finish_budget": 0},
        {"rep_selection": "latest"},
    ])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            PruneConfig(**kw)


def test_tokenize_whitespace():
    assert tokenize("a  b\nc") == ("a", "b", "c")


def test_check_partition():
    clusters = [Cluster(0, ["a", "b"]), Cluster(1, ["c"])]
    assert check_partition(clusters, ["a", "b", "c"])
    assert not check_partition(clusters, ["a", "b"])
    assert not check_partition([Cluster(0, ["a"]), Cluster(1, ["a"])], ["a"])
