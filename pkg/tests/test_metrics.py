import numpy as np
import pytest

from tracepruner.metrics import (
    LengthMismatch,
    SingleClass,
    ZeroBaseline,
    auroc,
    delta_token_pct,
    pass_at_clusters,
    roc_curve,
    tnr_at_fnr,
    trapezoid_area,
)


def auroc_brute_force(scores, labels):
    """All-pairs P(pos > neg) + 0.5 P(tie)."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def tnr_brute_force(scores, labels, cap):
    """Exhaustive sweep over observed thresholds; score >= thr predicts positive."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    best = None
    for thr in sorted(set(scores)):
        fnr = sum(1 for s in pos if s < thr) / len(pos)
        if fnr > cap:
            continue
        tnr = sum(1 for s in neg if s < thr) / len(neg)
        if best is None or tnr > best[0]:
            best = (tnr, thr)
    return best


def random_instance(rng, with_ties=True):
    n = int(rng.integers(4, 200))
    if with_ties and rng.random() < 0.5:
        scores = rng.integers(0, 8, size=n) / 7.0  # coarse grid forces ties
    else:
        scores = rng.random(n)
    labels = rng.integers(0, 2, size=n)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    return list(scores), list(labels)


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0

    def test_symmetric_swap_is_half(self):
        assert auroc([0.9, 0.8, 0.7, 0.95], [1, 1, 0, 0]) == pytest.approx(0.5)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            scores, labels = random_instance(rng)
            assert auroc(scores, labels) == pytest.approx(
                auroc_brute_force(scores, labels), abs=1e-9
            )

    def test_negation_antisymmetry_tie_free(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            scores, labels = random_instance(rng, with_ties=False)
            assert auroc(scores, labels) == pytest.approx(
                1.0 - auroc([-s for s in scores], labels), abs=1e-12
            )

    def test_single_class_rejected(self):
        with pytest.raises(SingleClass):
            auroc([0.1, 0.2], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            auroc([0.1], [1, 0])


class TestTnrAtFnr:
    def test_perfect_separation(self):
        tnr, _ = tnr_at_fnr([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0], 0.2)
        assert tnr == 1.0

    def test_all_identical_scores(self):
        tnr, _ = tnr_at_fnr([0.5] * 6, [1, 1, 1, 0, 0, 0], 0.2)
        assert tnr == 0.0

    def test_worked_example(self):
        # pos=[.9,.8,.3], neg=[.7,.2], cap=0.34: threshold .8 keeps FNR=1/3
        # and flags both negatives, so the sweep maximum is TNR=1.
        scores = [0.9, 0.8, 0.3, 0.7, 0.2]
        labels = [1, 1, 1, 0, 0]
        got = tnr_at_fnr(scores, labels, 0.34)
        assert got == tnr_brute_force(scores, labels, 0.34)
        assert got == (1.0, 0.8)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            scores, labels = random_instance(rng)
            cap = float(rng.choice([0.0, 0.1, 0.2, 0.34, 0.5]))
            assert tnr_at_fnr(scores, labels, cap) == tnr_brute_force(scores, labels, cap)

    def test_bad_cap(self):
        with pytest.raises(ValueError):
            tnr_at_fnr([0.1, 0.9], [0, 1], 1.5)


class TestRocCurve:
    def test_perfect_classifier_hits_corner(self):
        points = roc_curve([0.9, 0.8, 0.1], [1, 1, 0])
        assert (0.0, 1.0) in points
        assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)

    def test_trapezoid_equals_auroc(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            scores, labels = random_instance(rng)
            points = roc_curve(scores, labels)
            assert trapezoid_area(points) == pytest.approx(auroc(scores, labels), abs=1e-12)

    def test_monotone(self):
        rng = np.random.default_rng(5)
        scores, labels = list(rng.random(1000)), list(rng.integers(0, 2, size=1000))
        points = roc_curve(scores, labels)
        for (x0, y0), (x1, y1) in zip(points, points[1:]):
            assert x1 >= x0 and y1 >= y0


class TestDeltaToken:
    def test_table_style_savings(self):
        assert delta_token_pct(0.42e8, 3.62e8) == pytest.approx(-88.4, abs=0.05)

    def test_equal_is_zero(self):
        assert delta_token_pct(123.0, 123.0) == 0.0

    def test_linear_identity(self):
        for r in (0.1, 0.5, 0.913):
            assert delta_token_pct(1000 * (1 - r), 1000) == pytest.approx(-100 * r, abs=1e-9)

    def test_zero_baseline(self):
        with pytest.raises(ZeroBaseline):
            delta_token_pct(1.0, 0.0)


class TestPassAtClusters:
    def test_any_representative_correct(self):
        assert pass_at_clusters(["A", "B"], "B") is True

    def test_none_correct(self):
        assert pass_at_clusters(["A"], "B") is False

    def test_equivalence_based(self):
        assert pass_at_clusters(["1/2"], "0.5") is True


def test_csv_emitters(tmp_path):
    from tracepruner.metrics import roc_to_csv

    points = roc_curve([0.9, 0.1], [1, 0])
    out = tmp_path / "roc.csv"
    roc_to_csv(points, out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "fpr,tpr"
    assert len(lines) == len(points) + 1
