"""Uncertainty metrics summarizing a stack of stochastic prediction rows."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import PredictiveDistribution


@dataclass(frozen=True, eq=False)
class UncertaintySummary:
    """Per-class mean and population std plus per-pass argmax agreement.

    ``variation_ratio`` is 1 minus the fraction of passes agreeing with the
    modal predicted class.  Argmax ties break toward the lowest class index.
    """

    mean: np.ndarray
    std: np.ndarray
    variation_ratio: float
    modal_class: int
    per_pass_argmax: tuple[int, ...]
    example_id: str = ""


def _as_matrix(dist) -> np.ndarray:
    if isinstance(dist, PredictiveDistribution):
        return dist.passes
    arr = np.asarray(dist, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a (T, channels) matrix")
    return arr


def summarize(dist, example_id: str | None = None) -> UncertaintySummary:
    """Summarize a PredictiveDistribution or a bare (T, channels) matrix.

    Bare matrices cover the two-column evidence matrices built from a sentinel's
    class space, whose rows deliberately do not sum to 1.
    """
    passes = _as_matrix(dist)
    t_count = passes.shape[0]
    argmax = tuple(int(i) for i in passes.argmax(axis=1))
    counts = np.bincount(argmax, minlength=passes.shape[1])
    modal = int(counts.argmax())
    variation_ratio = 1.0 - counts[modal] / t_count
    std = passes.std(axis=0)
    # a constant column has std exactly 0, not mean-roundoff dust
    std[passes.max(axis=0) == passes.min(axis=0)] = 0.0
    if example_id is None:
        example_id = dist.example_id if isinstance(dist, PredictiveDistribution) else ""
    return UncertaintySummary(
        mean=passes.mean(axis=0),
        std=std,
        variation_ratio=float(variation_ratio),
        modal_class=modal,
        per_pass_argmax=argmax,
        example_id=example_id,
    )


def ordinal_quantile(dist, q: float, ordering) -> int:
    """Nearest-rank quantile of the per-pass argmax classes under an ordinal ordering.

    The T argmax classes are sorted from lowest to highest per ``ordering`` and
    the 1-based element ceil(q*T) is returned; q = 0 returns the minimum.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    passes = _as_matrix(dist)
    class_count = passes.shape[1]
    ordering = tuple(int(c) for c in ordering)
    if sorted(ordering) != list(range(class_count)):
        raise ValueError(f"ordering {ordering} is not a permutation of all {class_count} classes")
    position = {cls: rank for rank, cls in enumerate(ordering)}
    ranked = sorted((position[int(i)] for i in passes.argmax(axis=1)))
    t_count = len(ranked)
    # tiny slack so q*T landing a hair above an exact integer does not skip a rank
    k = math.ceil(q * t_count - 1e-12)
    k = min(max(k, 1), t_count)
    return ordering[ranked[k - 1]]


def summary_record(summary: UncertaintySummary) -> dict:
    """Flat JSON-ready form used in reports."""
    return {
        "example_id": summary.example_id,
        "mean": [float(v) for v in summary.mean],
        "std": [float(v) for v in summary.std],
        "variation_ratio": summary.variation_ratio,
        "modal_class": summary.modal_class,
    }
