"""Classification and ranking quality metrics for before/after comparisons.

Average precision uses the interpolation-free step sum over the ranked sweep;
PR AUC integrates the same curve with the trapezoid rule, anchored at
(recall 0, precision 1).  Both sweep every distinct score as a threshold and
treat equal scores as a single step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ScoredPrediction:
    example_id: str
    score: float
    gold: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")
        if self.gold not in (0, 1):
            raise ValueError(f"gold must be binary, got {self.gold}")


@dataclass(frozen=True)
class RankedQuery:
    query_id: str
    relevant_rank: int | None = None

    def __post_init__(self) -> None:
        if self.relevant_rank is not None and self.relevant_rank < 1:
            raise ValueError(f"relevant_rank must be >= 1, got {self.relevant_rank}")


def _pr_sweep(preds) -> list[tuple[float, float]]:
    """(recall, precision) points sweeping the threshold down the distinct scores."""
    pos_total = sum(p.gold for p in preds)
    ranked = sorted(preds, key=lambda p: -p.score)
    points = []
    tp = 0
    seen = 0
    i = 0
    while i < len(ranked):
        j = i
        while j < len(ranked) and ranked[j].score == ranked[i].score:
            tp += ranked[j].gold
            seen += 1
            j += 1
        points.append((tp / pos_total, tp / seen))
        i = j
    return points


def classification_metrics(preds, threshold: float) -> dict:
    """F1 at a fixed threshold (strict: score > threshold predicts positive),
    plus threshold-free PR AUC and average precision."""
    preds = list(preds)
    if not preds:
        raise ValueError("no predictions to score")
    if sum(p.gold for p in preds) == 0:
        raise ValueError("need at least one positive gold example")
    tp = sum(1 for p in preds if p.score > threshold and p.gold == 1)
    fp = sum(1 for p in preds if p.score > threshold and p.gold == 0)
    fn = sum(1 for p in preds if p.score <= threshold and p.gold == 1)
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom else 0.0
    points = _pr_sweep(preds)
    ap = 0.0
    auc = 0.0
    prev_r, prev_p = 0.0, 1.0
    for r, p in points:
        ap += (r - prev_r) * p
        auc += (r - prev_r) * (p + prev_p) / 2.0
        prev_r, prev_p = r, p
    return {"f1": f1, "pr_auc": auc, "average_precision": ap}


def ranking_metrics(queries) -> dict:
    """MRR counts absent ranks as 0; avg_rank averages only over present ranks
    (NaN when no query retrieved anything relevant)."""
    queries = list(queries)
    if not queries:
        raise ValueError("no queries to score")
    mrr = sum(1.0 / q.relevant_rank for q in queries if q.relevant_rank is not None) / len(queries)
    present = [q.relevant_rank for q in queries if q.relevant_rank is not None]
    avg_rank = sum(present) / len(present) if present else math.nan
    return {"mrr": mrr, "avg_rank": avg_rank}


def relative_recall_change(baseline_recall: float, new_recall: float) -> float:
    """Absolute recall change normalized by the remaining headroom 1 - baseline."""
    if not 0.0 <= baseline_recall < 1.0:
        raise ValueError(f"baseline recall must lie in [0, 1), got {baseline_recall}")
    if not 0.0 <= new_recall <= 1.0:
        raise ValueError(f"new recall must lie in [0, 1], got {new_recall}")
    return (new_recall - baseline_recall) / (1.0 - baseline_recall)


def recall_at_confidence(preds, tau: float) -> float:
    """Fraction of examples whose score strictly exceeds the confidence gate."""
    preds = list(preds)
    if not preds:
        raise ValueError("no predictions to score")
    return sum(1 for p in preds if p.score > tau) / len(preds)
