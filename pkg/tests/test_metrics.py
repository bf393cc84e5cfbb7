import math

import numpy as np
import pytest

from labelaudit.metrics import (
    RankedQuery,
    ScoredPrediction,
    classification_metrics,
    ranking_metrics,
    recall_at_confidence,
    relative_recall_change,
)


def _preds(scores, golds):
    return [ScoredPrediction(f"p{i}", s, g) for i, (s, g) in enumerate(zip(scores, golds))]


# -- independent exhaustive-threshold oracle ---------------------------------

def oracle_pr_points(scores, golds):
    """Brute force: every distinct score as an inclusive threshold, descending."""
    n_pos = sum(golds)
    points = []
    for th in sorted(set(scores), reverse=True):
        predicted = [s >= th for s in scores]
        tp = sum(1 for p, g in zip(predicted, golds) if p and g)
        points.append((tp / n_pos, tp / sum(predicted)))
    return points


def oracle_average_precision(scores, golds):
    ap, prev_r = 0.0, 0.0
    for r, p in oracle_pr_points(scores, golds):
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def oracle_pr_auc(scores, golds):
    pts = [(0.0, 1.0)] + oracle_pr_points(scores, golds)
    return sum((r1 - r0) * (p1 + p0) / 2.0 for (r0, p0), (r1, p1) in zip(pts, pts[1:]))


def test_perfect_separation():
    m = classification_metrics(_preds([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]), 0.5)
    assert m["f1"] == 1.0
    assert m["pr_auc"] == pytest.approx(1.0, abs=1e-12)
    assert m["average_precision"] == pytest.approx(1.0, abs=1e-12)


def test_f1_harmonic_mean_case():
    # tp=1, fp=1, fn=1 at threshold 0.5
    m = classification_metrics(_preds([0.9, 0.8, 0.2, 0.1], [1, 0, 1, 0]), 0.5)
    assert m["f1"] == pytest.approx(0.5)


def test_four_example_case_matches_oracle():
    scores, golds = [0.9, 0.8, 0.3, 0.2], [1, 0, 1, 0]
    m = classification_metrics(_preds(scores, golds), 0.5)
    # frozen from the exhaustive-threshold oracle: AP = 5/6, trapezoid AUC = 19/24
    assert oracle_average_precision(scores, golds) == pytest.approx(5 / 6, abs=1e-12)
    assert oracle_pr_auc(scores, golds) == pytest.approx(19 / 24, abs=1e-12)
    assert m["average_precision"] == pytest.approx(5 / 6, abs=1e-12)
    assert m["pr_auc"] == pytest.approx(19 / 24, abs=1e-12)


def test_strict_threshold_semantics():
    m = classification_metrics(_preds([0.5, 0.4], [1, 0]), 0.5)
    assert m["f1"] == 0.0  # score == threshold does not predict positive


def test_tied_scores_form_one_step():
    scores, golds = [0.6, 0.6, 0.6, 0.2], [1, 0, 1, 0]
    m = classification_metrics(_preds(scores, golds), 0.5)
    assert m["average_precision"] == pytest.approx(oracle_average_precision(scores, golds), abs=1e-12)
    assert m["pr_auc"] == pytest.approx(oracle_pr_auc(scores, golds), abs=1e-12)


def test_random_instances_match_oracle(rng):
    # spot check; the acceptance suite runs 1000 trials at 1e-9
    for _ in range(200):
        n = int(rng.integers(2, 30))
        scores = np.round(rng.random(n), 2).tolist()
        golds = rng.integers(0, 2, size=n).tolist()
        if sum(golds) == 0:
            golds[0] = 1
        m = classification_metrics(_preds(scores, golds), 0.5)
        assert m["average_precision"] == pytest.approx(oracle_average_precision(scores, golds), abs=1e-9)
        assert m["pr_auc"] == pytest.approx(oracle_pr_auc(scores, golds), abs=1e-9)


def test_rank_metrics_invariant_under_monotone_transform(rng):
    for _ in range(50):
        n = int(rng.integers(2, 20))
        scores = rng.random(n).tolist()
        golds = rng.integers(0, 2, size=n).tolist()
        if sum(golds) == 0:
            golds[0] = 1
        m1 = classification_metrics(_preds(scores, golds), 0.5)
        m2 = classification_metrics(_preds([s * s for s in scores], golds), 0.5)
        assert m1["average_precision"] == pytest.approx(m2["average_precision"], abs=1e-12)
        assert m1["pr_auc"] == pytest.approx(m2["pr_auc"], abs=1e-12)


def test_classification_metrics_errors():
    with pytest.raises(ValueError):
        classification_metrics([], 0.5)
    with pytest.raises(ValueError):
        classification_metrics(_preds([0.5], [0]), 0.5)
    with pytest.raises(ValueError):
        ScoredPrediction("a", 1.5, 1)


def test_mrr_single_query_rank_one():
    m = ranking_metrics([RankedQuery("q", 1)])
    assert m == {"mrr": 1.0, "avg_rank": 1.0}


def test_mrr_arithmetic():
    m = ranking_metrics([RankedQuery("a", 2), RankedQuery("b", 4)])
    assert m["mrr"] == pytest.approx(0.375)
    assert m["avg_rank"] == pytest.approx(3.0)


def test_absent_rank_convention():
    m = ranking_metrics([RankedQuery("a"), RankedQuery("b", 1)])
    assert m["mrr"] == pytest.approx(0.5)  # absent contributes 0
    assert m["avg_rank"] == pytest.approx(1.0)  # absent excluded


def test_all_absent_gives_nan_avg_rank():
    m = ranking_metrics([RankedQuery("a"), RankedQuery("b")])
    assert m["mrr"] == 0.0
    assert math.isnan(m["avg_rank"])


def test_mrr_bounds(rng):
    for _ in range(100):
        n = int(rng.integers(1, 10))
        queries = [
            RankedQuery(f"q{i}", None if rng.random() < 0.3 else int(rng.integers(1, 20)))
            for i in range(n)
        ]
        m = ranking_metrics(queries)
        assert 0.0 <= m["mrr"] <= 1.0
        if m["mrr"] == 1.0:
            assert all(q.relevant_rank == 1 for q in queries)


def test_ranking_metrics_errors():
    with pytest.raises(ValueError):
        ranking_metrics([])
    with pytest.raises(ValueError):
        RankedQuery("a", 0)


def test_relative_recall_change_formula():
    assert relative_recall_change(0.5, 0.55) == pytest.approx(0.10)
    assert relative_recall_change(0.4, 0.4) == 0.0
    assert relative_recall_change(0.0, 0.2) == pytest.approx(0.2)


def test_relative_recall_is_linear_in_new_recall():
    baseline = 0.25
    slope = 1.0 / (1.0 - baseline)
    for new in (0.0, 0.3, 0.6, 0.9):
        assert relative_recall_change(baseline, new) == pytest.approx((new - baseline) * slope)


def test_relative_recall_rejects_degenerate_baseline():
    with pytest.raises(ValueError):
        relative_recall_change(1.0, 0.5)


def test_recall_at_confidence():
    preds = _preds([0.9, 0.4], [1, 0])
    assert recall_at_confidence(preds, 0.5) == pytest.approx(0.5)
    assert recall_at_confidence(preds, 0.0) == 1.0  # all scores strictly above 0
    assert recall_at_confidence(preds, 1.0) == 0.0
    with pytest.raises(ValueError):
        recall_at_confidence([], 0.5)
