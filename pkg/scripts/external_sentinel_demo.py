#!/usr/bin/env python3
"""End-to-end demo of the external-sentinel path with a label-space mapping.

Simulates a three-class entailment-style sentinel (entailment / neutral /
contradiction) judging a corrupted binary dataset: its per-pass class
probabilities are written to a dump, mapped onto (supports_positive,
supports_negative) evidence, and the filter policy removes refuted examples.
Detection quality is then scored against the corruption mask.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from labelaudit.data import PredictiveDistribution, save_dataset, save_distributions
from labelaudit.noisebench import NoiseSpec, detection_scores, inject_noise, make_blobs
from labelaudit.policy import FilterThresholds, apply_decisions, decide_filter
from labelaudit.sentinel import LabelSpaceMapping, ingest_external_dump, map_to_evidence
from labelaudit.uncertainty import summarize

PASSES = 10


def fake_entailment_dump(dataset, accuracy, seed):
    """Per-pass (entailment, neutral, contradiction) rows leaning toward gold."""
    rng = np.random.default_rng(seed)
    dists = []
    for ex in dataset.examples:
        informative = rng.random() < accuracy
        rows = np.empty((PASSES, 3))
        for t in range(PASSES):
            if not informative:
                weights = rng.dirichlet((2.0, 4.0, 2.0))  # mostly neutral
            elif ex.gold_label == 1:
                weights = rng.dirichlet((14.0, 2.0, 1.0))  # entailed
            else:
                weights = rng.dirichlet((1.0, 2.0, 14.0))  # contradicted
            rows[t] = weights
        dists.append(PredictiveDistribution(ex.id, rows))
    return dists


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--noise-rate", type=float, default=0.3)
    parser.add_argument("--sentinel-accuracy", type=float, default=0.9)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="out/external_demo")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    clean = make_blobs(args.n, 2, 2, [(-2, 0), (2, 0)], 1.0, args.seed)
    noisy, mask = inject_noise(clean, NoiseSpec(args.noise_rate, "symmetric", seed=args.seed + 1))
    save_dataset(noisy, str(out / "noisy.jsonl"))

    dump_path = out / "sentinel_dump.jsonl"
    save_distributions(fake_entailment_dump(noisy, args.sentinel_accuracy, args.seed + 2), str(dump_path))

    mapping = LabelSpaceMapping(
        ("entailment", "neutral", "contradiction"),
        ("supports_positive", "abstain", "supports_negative"),
    )
    (out / "mapping.json").write_text(
        '{"classes": ["entailment", "neutral", "contradiction"],'
        ' "roles": ["supports_positive", "abstain", "supports_negative"]}\n'
    )

    thresholds = FilterThresholds()  # t1=0.75 s1=0.2 t2=0.7 s2=0.2
    labels = noisy.labels_by_id()
    decisions = []
    for dist in ingest_external_dump(str(dump_path), PASSES, 3):
        evidence = map_to_evidence(dist, mapping)
        summary = summarize(evidence, example_id=dist.example_id)
        decisions.append(decide_filter(summary, labels[dist.example_id], thresholds))

    cleaned, apply_report = apply_decisions(noisy, decisions, "filter_only")
    save_dataset(cleaned, str(out / "cleaned.jsonl"))
    report = detection_scores(decisions, mask)

    print(f"corrupted {len(mask.corrupted_ids)} of {args.n}; removed {apply_report.removed}")
    print(
        f"detection: precision {report.precision:.3f}  recall {report.recall:.3f}"
        f"  ({report.true_flag_count} true flags)"
    )
    print(f"artifacts: {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
