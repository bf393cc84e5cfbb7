"""End-to-end orchestration: sentinel -> uncertainty -> decisions -> apply ->
retrain -> evaluate, plus the threshold grid sweep and report emission.

Every stochastic stage draws its seed from a fixed stream of the pipeline seed
(see ``_Stream``), so two runs with the same config produce byte-identical
decision and dataset files; the report's only volatile content lives under the
single ``run_stamp`` key.
"""
from __future__ import annotations

import itertools
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .data import (
    Dataset,
    feature_matrix,
    label_vector,
    load_dataset,
    save_dataset,
)
from .metrics import ScoredPrediction, classification_metrics
from .mlp import Model, ModelSpec, TrainConfig, init_model, predict_batch, train
from .noisebench import (
    NoiseMask,
    NoiseSpec,
    detection_scores,
    inject_noise,
    make_blobs,
    save_noise_mask,
)
from .policy import (
    FILTER_ONLY,
    KEEP,
    OVERWRITE_MODE,
    FilterThresholds,
    OverwriteThresholds,
    QuantileThresholds,
    apply_decisions,
    decide_filter,
    decide_overwrite,
    decide_quantile,
    rule_histogram,
    save_decisions,
    thresholds_from_section,
    thresholds_to_section,
)
from .seeding import mix64
from .sentinel import (
    FoldAssignment,
    LabelSpaceMapping,
    build_cv_sentinel,
    ingest_external_dump,
    map_to_evidence,
)
from .uncertainty import summarize

POLICY_KINDS = ("filter", "overwrite", "quantile")
SENTINEL_SOURCES = ("cv", "external")


class PipelineError(RuntimeError):
    """A stage failed mid-run; the message names the stage."""


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as err:
        raise PipelineError(f"stage {name!r}: {err}") from err


class _Stream:
    """Seed streams for the pipeline stages (mixed with the root seed)."""

    TRAIN_CONFIG = 3
    SENTINEL = 4
    RETRAIN = 5
    SWEEP_SENTINEL = 6
    BLOBS_TRAIN = 10
    BLOBS_DEV = 11
    BLOBS_TEST = 12
    NOISE_TRAIN = 13
    NOISE_DEV = 14


@dataclass(frozen=True)
class BenchmarkConfig:
    """Synthetic scenario: blob geometry plus the corruption to inject."""

    n: int = 2000
    dim: int = 2
    class_count: int = 2
    centers: tuple[tuple[float, ...], ...] = ((-2.0, 0.0), (2.0, 0.0))
    spread: float = 1.0
    dev_size: int = 200
    test_size: int = 500
    noise_rate: float = 0.3
    noise_kind: str = "symmetric"
    transition: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "centers", tuple(tuple(float(v) for v in c) for c in self.centers))
        if self.transition is not None:
            object.__setattr__(
                self, "transition", tuple(tuple(float(v) for v in r) for r in self.transition)
            )
        if self.n < 1 or self.dev_size < 1 or self.test_size < 1:
            raise ValueError("benchmark sizes must be positive")

    def noise_spec(self, seed: int) -> NoiseSpec:
        return NoiseSpec(
            rate=self.noise_rate, kind=self.noise_kind, seed=seed, transition=self.transition
        )


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    out_dir: str = "out"
    dataset: str | None = None
    test_dataset: str | None = None
    dev_dataset: str | None = None
    sentinel: str = "cv"
    folds: int = 5
    dump: str | None = None
    dev_dump: str | None = None
    mapping: str | None = None
    passes: int = 10
    hidden_dims: tuple[int, ...] = (64, 64)
    dropout: float = 0.1
    learning_rate: float = 0.3
    epochs: int = 150
    batch_size: int = 64
    policy: str = "overwrite"
    thresholds: FilterThresholds | OverwriteThresholds | QuantileThresholds | None = None
    benchmark: BenchmarkConfig | None = None
    sweep: dict | None = None
    report_format: str = "json"

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.sentinel not in SENTINEL_SOURCES:
            raise ValueError(f"sentinel must be one of {SENTINEL_SOURCES}, got {self.sentinel!r}")
        if self.policy not in POLICY_KINDS:
            raise ValueError(f"policy must be one of {POLICY_KINDS}, got {self.policy!r}")
        if self.sentinel == "external" and self.dump is None:
            raise ValueError("external sentinel needs a dump path")
        if self.sentinel == "cv" and self.dump is not None:
            raise ValueError("config names both a cv sentinel and an external dump; pick one source")
        if self.sentinel == "external" and self.benchmark is not None:
            raise ValueError("benchmark mode generates its data and requires the cv sentinel")
        if self.benchmark is None and self.dataset is None:
            raise ValueError("need either a dataset path or a benchmark section")
        if self.benchmark is not None and self.dataset is not None:
            raise ValueError("benchmark mode and a dataset path are mutually exclusive")
        if self.thresholds is not None:
            expected = {"filter": FilterThresholds, "overwrite": OverwriteThresholds, "quantile": QuantileThresholds}
            if not isinstance(self.thresholds, expected[self.policy]):
                raise ValueError(
                    f"thresholds section does not match policy {self.policy!r}"
                )
        if self.report_format not in ("json", "text"):
            raise ValueError(f"report format must be json or text, got {self.report_format!r}")

    def resolved_thresholds(self, class_count: int):
        if self.thresholds is not None:
            return self.thresholds
        if self.policy == "filter":
            return FilterThresholds()
        if self.policy == "overwrite":
            return OverwriteThresholds()
        if class_count != 2:
            raise ValueError("quantile policy needs explicit thresholds for a non-binary label space")
        return QuantileThresholds(ordering=(0, 1), good_set=frozenset({1}), bad_set=frozenset({0}))

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=mix64(self.seed, _Stream.TRAIN_CONFIG),
        )


def config_from_dict(doc: dict) -> PipelineConfig:
    """Build a config from the JSON document schema used by the CLI."""
    doc = dict(doc)
    policy = doc.get("policy", "overwrite")
    thresholds = None
    section = doc.get("thresholds")
    if section is not None:
        if set(section) - set(POLICY_KINDS):
            raise ValueError(f"unknown threshold sections {sorted(set(section) - set(POLICY_KINDS))}")
        if policy in section:
            thresholds = thresholds_from_section(policy, section[policy])
        elif section:
            raise ValueError(f"thresholds section {sorted(section)} does not match policy {policy!r}")
    benchmark = None
    if doc.get("benchmark") is not None:
        b = dict(doc["benchmark"])
        noise = dict(b.pop("noise", {}))
        benchmark = BenchmarkConfig(
            n=b.get("n", 2000),
            dim=b.get("d", b.get("dim", 2)),
            class_count=b.get("class_count", 2),
            centers=tuple(tuple(c) for c in b.get("centers", ((-2.0, 0.0), (2.0, 0.0)))),
            spread=b.get("spread", 1.0),
            dev_size=b.get("dev_size", 200),
            test_size=b.get("test_size", 500),
            noise_rate=noise.get("rate", 0.3),
            noise_kind=noise.get("kind", "symmetric"),
            transition=tuple(tuple(r) for r in noise["transition"]) if noise.get("transition") else None,
        )
    return PipelineConfig(
        seed=doc.get("seed", 0),
        out_dir=doc.get("out", doc.get("out_dir", "out")),
        dataset=doc.get("dataset"),
        test_dataset=doc.get("test_dataset"),
        dev_dataset=doc.get("dev_dataset"),
        sentinel=doc.get("sentinel", "cv"),
        folds=doc.get("folds", 5),
        dump=doc.get("dump"),
        dev_dump=doc.get("dev_dump"),
        mapping=doc.get("mapping"),
        passes=doc.get("passes", 10),
        hidden_dims=tuple(doc.get("hidden_dims", (64, 64))),
        dropout=doc.get("dropout", 0.1),
        learning_rate=doc.get("learning_rate", 0.3),
        epochs=doc.get("epochs", 150),
        batch_size=doc.get("batch_size", 64),
        policy=policy,
        thresholds=thresholds,
        benchmark=benchmark,
        sweep={k: list(v) for k, v in doc["sweep"].items()} if doc.get("sweep") else None,
        report_format=doc.get("format", "json"),
    )


def config_to_dict(config: PipelineConfig) -> dict:
    doc = {
        "seed": config.seed,
        "out": config.out_dir,
        "dataset": config.dataset,
        "test_dataset": config.test_dataset,
        "dev_dataset": config.dev_dataset,
        "sentinel": config.sentinel,
        "folds": config.folds,
        "dump": config.dump,
        "dev_dump": config.dev_dump,
        "mapping": config.mapping,
        "passes": config.passes,
        "hidden_dims": list(config.hidden_dims),
        "dropout": config.dropout,
        "learning_rate": config.learning_rate,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "policy": config.policy,
        "thresholds": {config.policy: thresholds_to_section(config.thresholds)}
        if config.thresholds is not None
        else None,
        "sweep": config.sweep,
        "format": config.report_format,
    }
    if config.benchmark is not None:
        b = config.benchmark
        doc["benchmark"] = {
            "n": b.n,
            "d": b.dim,
            "class_count": b.class_count,
            "centers": [list(c) for c in b.centers],
            "spread": b.spread,
            "dev_size": b.dev_size,
            "test_size": b.test_size,
            "noise": {
                "rate": b.noise_rate,
                "kind": b.noise_kind,
                "transition": [list(r) for r in b.transition] if b.transition else None,
            },
        }
    else:
        doc["benchmark"] = None
    return doc


def load_config(path: str) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


@dataclass
class PipelineResult:
    config: PipelineConfig
    report: dict
    decisions: list
    cleaned: Dataset
    thresholds: object
    fold_assignment: FoldAssignment | None = None
    noise_mask: NoiseMask | None = None
    sweep_table: list | None = None


def _load_mapping(config: PipelineConfig) -> LabelSpaceMapping | None:
    if config.mapping is not None:
        return LabelSpaceMapping.from_file(config.mapping)
    return None


def _decide_all(policy: str, dists, labels: dict[str, int], thresholds, mapping):
    decisions = []
    for dist in dists:
        label = labels.get(dist.example_id)
        if label is None:
            raise ValueError(f"distribution for unknown example {dist.example_id!r}")
        if policy == "overwrite":
            decisions.append(decide_overwrite(summarize(dist), label, thresholds))
        elif policy == "filter":
            m = mapping
            if m is None:
                if dist.class_count != 2:
                    raise ValueError(
                        "filter policy needs a label-space mapping for a non-binary sentinel"
                    )
                m = LabelSpaceMapping.binary_target()
            evidence = map_to_evidence(dist, m)
            decisions.append(
                decide_filter(summarize(evidence, example_id=dist.example_id), label, thresholds)
            )
        else:
            decisions.append(decide_quantile(dist, label, thresholds))
    return decisions


def _sentinel_distributions(config: PipelineConfig, dataset: Dataset, seed_stream: int, dump: str | None):
    """Distributions for one dataset, from CV or an external dump, gold stripped."""
    if config.sentinel == "cv":
        if dataset.feature_dim is None:
            raise ValueError("the cv sentinel needs feature-vector data")
        spec = ModelSpec(
            input_dim=dataset.feature_dim,
            hidden_dims=config.hidden_dims,
            class_count=dataset.class_count,
            dropout_rate=config.dropout,
        )
        return build_cv_sentinel(
            dataset.strip_gold(),
            config.folds,
            spec,
            config.train_config(),
            config.passes,
            mix64(config.seed, seed_stream),
        )
    if dump is None:
        raise ValueError("external sentinel needs a distribution dump for this dataset")
    mapping = _load_mapping(config)
    width = len(mapping.roles) if mapping is not None else dataset.class_count
    return ingest_external_dump(dump, config.passes, width), None


GRID_FIELDS = {"filter": ("t1", "s1", "t2", "s2"), "overwrite": ("t1", "s1", "t2", "s2"), "quantile": ("q1", "q2")}


def sweep_thresholds(config: PipelineConfig, clean_dev: Dataset):
    """Grid-search thresholds against the dev set's gold labels.

    Ground truth flags are the examples whose current label differs from gold.
    The point maximizing detection F1 wins; ties break toward fewer flags, then
    lexicographic threshold order.  Returns (best thresholds, full grid table).
    """
    if not config.sweep:
        raise ValueError("config carries no sweep grid")
    if not clean_dev.examples or any(ex.gold_label is None for ex in clean_dev.examples):
        raise ValueError("sweep needs a non-empty dev set with gold labels")
    fields = GRID_FIELDS[config.policy]
    unknown = set(config.sweep) - set(fields)
    if unknown:
        raise ValueError(f"sweep grid names unknown fields {sorted(unknown)} for policy {config.policy!r}")
    base = thresholds_to_section(config.resolved_thresholds(clean_dev.class_count))
    axes = [sorted(set(float(v) for v in config.sweep.get(f, [base[f]]))) for f in fields]
    truth = {ex.id: ex.label != ex.gold_label for ex in clean_dev.examples}
    labels = clean_dev.labels_by_id()
    dists, _ = _sentinel_distributions(config, clean_dev, _Stream.SWEEP_SENTINEL, config.dev_dump)
    mapping = _load_mapping(config)
    total_bad = sum(truth.values())
    table = []
    for point in itertools.product(*axes):
        section = dict(base)
        section.update(dict(zip(fields, point)))
        try:
            candidate = thresholds_from_section(config.policy, section)
        except ValueError:
            continue  # grid points violating threshold invariants are skipped
        decisions = _decide_all(config.policy, dists, labels, candidate, mapping)
        flagged = [d for d in decisions if d.verdict != KEEP]
        tp = sum(1 for d in flagged if truth[d.example_id])
        fp = len(flagged) - tp
        fn = total_bad - tp
        denom = 2 * tp + fp + fn
        f1 = 2 * tp / denom if denom else 0.0
        table.append(
            {
                **{f: v for f, v in zip(fields, point)},
                "f1": f1,
                "precision": tp / len(flagged) if flagged else 1.0,
                "recall": tp / total_bad if total_bad else 0.0,
                "flagged": len(flagged),
            }
        )
    if not table:
        raise ValueError("sweep grid is empty after dropping invalid points")
    best = min(table, key=lambda row: (-row["f1"], row["flagged"], tuple(row[f] for f in fields)))
    section = dict(base)
    section.update({f: best[f] for f in fields})
    return thresholds_from_section(config.policy, section), table


def _fit(spec: ModelSpec, train_cfg: TrainConfig, seed: int, dataset: Dataset) -> Model:
    return train(init_model(spec, seed), dataset, train_cfg)


def _evaluate(model: Model, test: Dataset) -> dict:
    probs = predict_batch(model, feature_matrix(test))
    labels = label_vector(test)
    accuracy = float(np.mean(probs.argmax(axis=1) == labels))
    out = {"accuracy": accuracy}
    if test.class_count == 2:
        preds = [
            ScoredPrediction(ex.id, float(probs[i, 1]), int(labels[i]))
            for i, ex in enumerate(test.examples)
        ]
        out.update(classification_metrics(preds, 0.5))
    return out


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Execute the full workflow and write decisions, cleaned data, and the report.

    In benchmark mode the train/dev/test splits are generated, noise is injected
    into train and dev, and detections are scored against the ground-truth mask.
    The baseline and cleaned retrains share seeds; only the training data differs.
    """
    started = time.perf_counter()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    mask = None
    dev = None
    test = None
    with _stage("data"):
        if config.benchmark is not None:
            b = config.benchmark
            clean_train = make_blobs(
                b.n, b.dim, b.class_count, b.centers, b.spread, mix64(config.seed, _Stream.BLOBS_TRAIN)
            )
            working, mask = inject_noise(
                clean_train, b.noise_spec(mix64(config.seed, _Stream.NOISE_TRAIN))
            )
            dev_clean = make_blobs(
                b.dev_size, b.dim, b.class_count, b.centers, b.spread, mix64(config.seed, _Stream.BLOBS_DEV)
            )
            dev, _ = inject_noise(dev_clean, b.noise_spec(mix64(config.seed, _Stream.NOISE_DEV)))
            test = make_blobs(
                b.test_size, b.dim, b.class_count, b.centers, b.spread, mix64(config.seed, _Stream.BLOBS_TEST)
            )
        else:
            working = load_dataset(config.dataset)
            if config.test_dataset:
                test = load_dataset(config.test_dataset)
            if config.dev_dataset:
                dev = load_dataset(config.dev_dataset)

    sweep_result = None
    with _stage("thresholds"):
        if config.sweep:
            if dev is None:
                raise ValueError("sweep requires a dev dataset with gold labels")
            thresholds, sweep_table = sweep_thresholds(config, dev)
            sweep_result = {"best": thresholds_to_section(thresholds), "table": sweep_table}
        else:
            sweep_table = None
            thresholds = config.resolved_thresholds(working.class_count)

    with _stage("sentinel"):
        dists, fold_assignment = _sentinel_distributions(
            config, working, _Stream.SENTINEL, config.dump
        )

    with _stage("decide"):
        decisions = _decide_all(
            config.policy, dists, working.labels_by_id(), thresholds, _load_mapping(config)
        )
        # decisions are the audit trail; persist them before anything is applied
        save_decisions(decisions, str(out_dir / "decisions.jsonl"))

    with _stage("apply"):
        mode = OVERWRITE_MODE if config.policy == "overwrite" else FILTER_ONLY
        cleaned, apply_report = apply_decisions(working, decisions, mode)
        save_dataset(cleaned, str(out_dir / "cleaned.jsonl"))
        if mask is not None:
            save_noise_mask(mask, str(out_dir / "noise_mask.json"))

    evaluation = None
    if test is not None:
        with _stage("retrain"):
            spec = ModelSpec(
                input_dim=working.feature_dim,
                hidden_dims=config.hidden_dims,
                class_count=working.class_count,
                dropout_rate=config.dropout,
            )
            train_cfg = config.train_config()
            retrain_seed = mix64(config.seed, _Stream.RETRAIN)
            baseline_model = _fit(spec, train_cfg, retrain_seed, working)
            cleaned_model = _fit(spec, train_cfg, retrain_seed, cleaned)
            evaluation = {
                "baseline": _evaluate(baseline_model, test),
                "cleaned": _evaluate(cleaned_model, test),
            }

    detection = None
    if mask is not None:
        with _stage("detection"):
            scores = detection_scores(decisions, mask)
            detection = {
                "precision": scores.precision,
                "recall": scores.recall,
                "overwrite_accuracy": scores.overwrite_accuracy,
                "flagged_count": scores.flagged_count,
                "corrupted_count": scores.corrupted_count,
                "true_flag_count": scores.true_flag_count,
            }

    report = {
        # the one volatile field; everything else is reproducible byte-for-byte
        "run_stamp": {
            "generated_at": datetime.now(timezone.utc).isoformat(),
            "wall_seconds": time.perf_counter() - started,
        },
        "config": config_to_dict(config),
        "thresholds": thresholds_to_section(thresholds),
        "sweep": sweep_result,
        "counts": {
            "input_size": len(working),
            "kept": apply_report.kept,
            "removed": apply_report.removed,
            "overwritten": apply_report.overwritten,
        },
        "rule_histogram": rule_histogram(decisions),
        "detection": detection,
        "evaluation": evaluation,
    }
    with _stage("report"):
        emit_report(report, "json", str(out_dir / "report.json"))
        if config.report_format == "text":
            emit_report(report, "text", str(out_dir / "report.txt"))

    return PipelineResult(
        config=config,
        report=report,
        decisions=decisions,
        cleaned=cleaned,
        thresholds=thresholds,
        fold_assignment=fold_assignment,
        noise_mask=mask,
        sweep_table=sweep_table,
    )


def _render_text(report: dict) -> str:
    lines = ["== run summary =="]
    counts = report["counts"]
    lines.append(
        f"examples: {counts['input_size']}  kept: {counts['kept']}"
        f"  removed: {counts['removed']}  overwritten: {counts['overwritten']}"
    )
    lines.append("== thresholds ==")
    lines.append(json.dumps(report["thresholds"], sort_keys=True))
    lines.append("== fired rules ==")
    for rule, count in report["rule_histogram"].items():
        lines.append(f"{rule}: {count}")
    if report.get("detection"):
        d = report["detection"]
        lines.append("== detection vs ground truth ==")
        lines.append(
            f"precision: {d['precision']:.4f}  recall: {d['recall']:.4f}"
            f"  overwrite_accuracy: {d['overwrite_accuracy']:.4f}"
        )
    if report.get("evaluation"):
        lines.append("== evaluation (baseline -> cleaned) ==")
        base, clean = report["evaluation"]["baseline"], report["evaluation"]["cleaned"]
        for key in sorted(base):
            lines.append(f"{key}: {base[key]:.4f} -> {clean[key]:.4f}")
    if report.get("sweep"):
        lines.append("== sweep best ==")
        lines.append(json.dumps(report["sweep"]["best"], sort_keys=True))
    lines.append("== config ==")
    lines.append(json.dumps(report["config"], sort_keys=True))
    lines.append(f"generated_at: {report['run_stamp']['generated_at']}")
    return "\n".join(lines) + "\n"


def emit_report(report: dict, fmt: str, path: str) -> None:
    """Write the report as schema-stable JSON or a human-readable text digest."""
    if fmt == "json":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    elif fmt == "text":
        text = _render_text(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def default_benchmark_config(
    variant: str = "symmetric", seed: int = 1, out_dir: str = "out", **overrides
) -> PipelineConfig:
    """The stock noise-recovery scenario: overlapping two-blob geometry, 30%
    corruption, CV sentinel, overwrite policy, thresholds swept on a
    200-example dev split.

    The ``asymmetric`` variant is one-directional (class 1 flips to 0, class 0
    immune), the regime where corruption shifts the learned boundary outright.
    The training budget is deliberately short: at this scale a longer budget
    converges to the same boundary with or without symmetric noise, hiding the
    damage the cleaning is supposed to repair.
    """
    if variant == "symmetric":
        kind, transition = "symmetric", None
    elif variant == "asymmetric":
        kind, transition = "asymmetric", ((0.0, 0.0), (1.0, 0.0))
    else:
        raise ValueError(f"unknown benchmark variant {variant!r}")
    benchmark = BenchmarkConfig(noise_kind=kind, transition=transition)
    params = {
        "seed": seed,
        "out_dir": out_dir,
        "benchmark": benchmark,
        "policy": "overwrite",
        "hidden_dims": (32, 32),
        "learning_rate": 0.3,
        "epochs": 5,
        "batch_size": 64,
        "sweep": {
            "t1": [0.05, 0.1, 0.2, 0.3, 0.4],
            "s1": [0.1, 0.15, 0.2],
            "t2": [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            "s2": [0.1, 0.15, 0.2],
        },
    }
    params.update(overrides)
    return PipelineConfig(**params)
