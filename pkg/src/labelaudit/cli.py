"""Command-line front end: one subcommand per workflow stage plus a full run.

Every flag has a config-file counterpart and flags override the config.  Exit
codes: 0 success, 1 validation error (bad flags, malformed inputs, violated
invariants), 2 runtime failure mid-pipeline.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import (
    DataFormatError,
    load_dataset,
    save_dataset,
    save_distributions,
)
from .mlp import ModelSpec, TrainConfig, init_model, load_model, mcd_predict, save_model, train
from .noisebench import NoiseSpec, inject_noise, make_blobs, save_noise_mask
from .pipeline import (
    PipelineError,
    _decide_all,
    _evaluate,
    _load_mapping,
    _sentinel_distributions,
    _Stream,
    config_from_dict,
    run_pipeline,
    sweep_thresholds,
)
from .policy import (
    apply_decisions,
    load_decisions,
    save_decisions,
    thresholds_to_section,
)
from .sdgmask import proposal_record, select_masks
from .seeding import mix64
from .sentinel import build_cv_sentinel


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--seed", type=int, help="root seed")
    parser.add_argument("--out", help="output path or directory")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--hidden-dims", help="comma-separated hidden layer widths")
    parser.add_argument("--dropout", type=float, help="dropout rate (training and stochastic passes)")
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)


def _add_policy_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--policy", choices=("filter", "overwrite", "quantile"))
    for name in ("t1", "s1", "t2", "s2", "q1", "q2"):
        parser.add_argument(f"--{name}", type=float)
    parser.add_argument("--mapping", help="label-space mapping JSON for the filter policy")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelaudit",
        description="Detect, remove, or overwrite label errors using multi-pass dropout uncertainty.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-data", help="generate Gaussian blob data with gold labels")
    _add_common(p)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--centers", help='JSON list of centers, e.g. "[[-2,0],[2,0]]"')
    p.add_argument("--spread", type=float, default=1.0)

    p = sub.add_parser("inject-noise", help="corrupt labels at a controlled rate")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--noise-rate", type=float, default=0.3)
    p.add_argument("--noise-kind", choices=("symmetric", "asymmetric"), default="symmetric")
    p.add_argument("--transition", help="JSON transition matrix for asymmetric noise")
    p.add_argument("--mask-out", help="where to write the corruption mask (ground truth)")

    p = sub.add_parser("train", help="train a classifier and write a checkpoint")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("mcd-infer", help="stochastic multi-pass inference with a trained model")
    _add_common(p)
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--dataset", required=True)
    p.add_argument("--passes", type=int, default=10)

    p = sub.add_parser("build-sentinel", help="out-of-fold distributions via cross-validation")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--passes", type=int, default=10)
    p.add_argument("--folds-out", help="where to write the fold assignment")

    p = sub.add_parser("decide", help="run a decision policy over distributions")
    _add_common(p)
    _add_policy_flags(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--dump", required=True, help="distribution file to decide from")
    p.add_argument("--passes", type=int, default=10)
    p.add_argument("--ordering", help="JSON ordinal class ordering (quantile policy)")
    p.add_argument("--good-set", help="JSON list of good classes (quantile policy)")
    p.add_argument("--bad-set", help="JSON list of bad classes (quantile policy)")

    p = sub.add_parser("apply", help="apply persisted decisions to a dataset")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--decisions", required=True)
    p.add_argument("--mode", choices=("filter_only", "overwrite"), default="filter_only")

    p = sub.add_parser("sweep", help="grid-search thresholds on a dev set with gold labels")
    _add_common(p)
    _add_model_flags(p)
    _add_policy_flags(p)
    p.add_argument("--dataset", help="dev dataset (overrides config dev_dataset)")
    p.add_argument("--folds", type=int)
    p.add_argument("--passes", type=int)
    p.add_argument("--sentinel", choices=("cv", "external"))
    p.add_argument("--dump", help="external dev distribution dump")
    p.add_argument("--grid", help='JSON grid, e.g. "{\\"t1\\": [0.2, 0.3]}"')

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a labeled dataset")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("sdg-mask", help="propose mask templates from tagged token data")
    _add_common(p)
    p.add_argument("--dataset", required=True, help="token-schema dataset")
    p.add_argument("--rule", type=int, required=True, choices=(1, 2, 3, 4))

    p = sub.add_parser("run", help="full pipeline from a config file")
    _add_common(p)
    _add_model_flags(p)
    _add_policy_flags(p)
    p.add_argument("--dataset")
    p.add_argument("--folds", type=int)
    p.add_argument("--passes", type=int)
    p.add_argument("--sentinel", choices=("cv", "external"))
    p.add_argument("--dump")
    p.add_argument("--noise-rate", type=float)
    p.add_argument("--noise-kind", choices=("symmetric", "asymmetric"))
    p.add_argument("--format", choices=("json", "text"))

    return parser


def _load_config_doc(args) -> dict:
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            return json.load(fh)
    return {}


def _overlay_pipeline_flags(doc: dict, args) -> dict:
    """Flags beat config fields; unset flags leave the config alone."""
    doc = dict(doc)
    direct = {
        "seed": "seed",
        "out": "out",
        "dataset": "dataset",
        "sentinel": "sentinel",
        "folds": "folds",
        "dump": "dump",
        "mapping": "mapping",
        "passes": "passes",
        "dropout": "dropout",
        "learning_rate": "learning_rate",
        "epochs": "epochs",
        "batch_size": "batch_size",
        "policy": "policy",
        "format": "format",
    }
    for attr, key in direct.items():
        value = getattr(args, attr, None)
        if value is not None:
            doc[key] = value
    if getattr(args, "hidden_dims", None):
        doc["hidden_dims"] = [int(v) for v in args.hidden_dims.split(",")]
    threshold_flags = {
        name: getattr(args, name) for name in ("t1", "s1", "t2", "s2", "q1", "q2")
        if getattr(args, name, None) is not None
    }
    if threshold_flags:
        policy = doc.get("policy", "overwrite")
        section = dict((doc.get("thresholds") or {}).get(policy, {}))
        section.update(threshold_flags)
        doc["thresholds"] = {policy: section}
    noise_flags = {}
    if getattr(args, "noise_rate", None) is not None:
        noise_flags["rate"] = args.noise_rate
    if getattr(args, "noise_kind", None) is not None:
        noise_flags["kind"] = args.noise_kind
    if noise_flags:
        bench = dict(doc.get("benchmark") or {})
        noise = dict(bench.get("noise") or {})
        noise.update(noise_flags)
        bench["noise"] = noise
        doc["benchmark"] = bench
    if getattr(args, "grid", None):
        doc["sweep"] = json.loads(args.grid)
    return doc


def _require(args, flag: str):
    value = getattr(args, flag.replace("-", "_"), None)
    if value is None:
        raise ValueError(f"--{flag} is required for this command")
    return value


def _cmd_make_data(args) -> int:
    out = _require(args, "out")
    classes = args.classes
    centers = json.loads(args.centers) if args.centers else None
    if centers is None:
        if args.d < 1:
            raise ValueError("--d must be >= 1")
        centers = [[(-2.0 if c == 0 else 2.0 * c)] + [0.0] * (args.d - 1) for c in range(classes)]
    dataset = make_blobs(args.n, args.d, classes, centers, args.spread, args.seed or 0)
    save_dataset(dataset, out)
    print(f"wrote {len(dataset)} examples to {out}")
    return 0


def _cmd_inject_noise(args) -> int:
    out = _require(args, "out")
    dataset = load_dataset(args.dataset)
    transition = json.loads(args.transition) if args.transition else None
    spec = NoiseSpec(
        rate=args.noise_rate, kind=args.noise_kind, seed=args.seed or 0, transition=transition
    )
    noisy, mask = inject_noise(dataset, spec)
    save_dataset(noisy, out)
    if args.mask_out:
        save_noise_mask(mask, args.mask_out)
    print(f"corrupted {len(mask.corrupted_ids)} of {len(dataset)} labels -> {out}")
    return 0


def _model_spec_from_args(args, dataset) -> ModelSpec:
    hidden = tuple(int(v) for v in (args.hidden_dims or "64,64").split(","))
    return ModelSpec(
        input_dim=dataset.feature_dim,
        hidden_dims=hidden,
        class_count=dataset.class_count,
        dropout_rate=args.dropout if args.dropout is not None else 0.1,
    )


def _train_config_from_args(args, seed: int) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.learning_rate if args.learning_rate is not None else 0.3,
        epochs=args.epochs if args.epochs is not None else 150,
        batch_size=args.batch_size if args.batch_size is not None else 64,
        seed=seed,
    )


def _cmd_train(args) -> int:
    out = _require(args, "out")
    dataset = load_dataset(args.dataset, expected_schema="features")
    spec = _model_spec_from_args(args, dataset)
    seed = args.seed or 0
    model = train(init_model(spec, seed), dataset, _train_config_from_args(args, seed))
    save_model(model, out)
    print(f"trained on {len(dataset)} examples -> {out}")
    return 0


def _cmd_mcd_infer(args) -> int:
    out = _require(args, "out")
    model = load_model(args.model)
    dataset = load_dataset(args.dataset, expected_schema="features")
    seed = args.seed or 0
    dists = [
        mcd_predict(model, ex.features, args.passes, mix64(seed, 1 + j), example_id=ex.id)
        for j, ex in enumerate(dataset.examples)
    ]
    save_distributions(dists, out)
    print(f"wrote {len(dists)} distributions ({args.passes} passes each) to {out}")
    return 0


def _cmd_build_sentinel(args) -> int:
    out = _require(args, "out")
    dataset = load_dataset(args.dataset, expected_schema="features")
    spec = _model_spec_from_args(args, dataset)
    seed = args.seed or 0
    dists, assignment = build_cv_sentinel(
        dataset.strip_gold(), args.folds, spec, _train_config_from_args(args, seed), args.passes, seed
    )
    save_distributions(dists, out)
    if args.folds_out:
        with open(args.folds_out, "w", encoding="utf-8") as fh:
            json.dump({"k": assignment.k, "fold_of": assignment.fold_of}, fh, sort_keys=True)
            fh.write("\n")
    print(f"wrote {len(dists)} out-of-fold distributions ({args.folds} folds) to {out}")
    return 0


def _cmd_decide(args) -> int:
    out = _require(args, "out")
    doc = _overlay_pipeline_flags(_load_config_doc(args), args)
    policy = doc.get("policy", "overwrite")
    if policy == "quantile":
        section = dict((doc.get("thresholds") or {}).get(policy, {}))
        for flag, key in (("ordering", "ordering"), ("good_set", "good_set"), ("bad_set", "bad_set")):
            value = getattr(args, flag, None)
            if value is not None:
                section[key] = json.loads(value)
        doc["thresholds"] = {policy: section}
    doc.setdefault("dataset", args.dataset)
    doc["sentinel"] = "external"
    doc["dump"] = args.dump
    config = config_from_dict(doc)
    dataset = load_dataset(args.dataset)
    thresholds = config.resolved_thresholds(dataset.class_count)
    dists, _ = _sentinel_distributions(config, dataset, _Stream.SENTINEL, args.dump)
    decisions = _decide_all(policy, dists, dataset.labels_by_id(), thresholds, _load_mapping(config))
    save_decisions(decisions, out)
    flagged = sum(1 for d in decisions if d.verdict != "keep")
    print(f"decided {len(decisions)} examples, flagged {flagged} -> {out}")
    return 0


def _cmd_apply(args) -> int:
    out = _require(args, "out")
    dataset = load_dataset(args.dataset)
    decisions = load_decisions(args.decisions)
    cleaned, report = apply_decisions(dataset, decisions, args.mode)
    save_dataset(cleaned, out)
    print(
        f"kept {report.kept} (overwrote {report.overwritten}), removed {report.removed} -> {out}"
    )
    return 0


def _cmd_sweep(args) -> int:
    doc = _overlay_pipeline_flags(_load_config_doc(args), args)
    if args.dataset:
        doc["dev_dataset"] = args.dataset
    if args.dump:
        doc["dev_dump"] = args.dump
        doc.setdefault("sentinel", "external")
        doc.setdefault("dump", args.dump)
    doc.setdefault("dataset", doc.get("dev_dataset"))
    config = config_from_dict(doc)
    if not config.sweep:
        raise ValueError("sweep needs a grid (--grid or config sweep section)")
    dev_path = doc.get("dev_dataset")
    if not dev_path:
        raise ValueError("sweep needs a dev dataset (--dataset or config dev_dataset)")
    dev = load_dataset(dev_path)
    best, table = sweep_thresholds(config, dev)
    print(json.dumps({"best": thresholds_to_section(best)}, sort_keys=True))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"best": thresholds_to_section(best), "table": table}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    dataset = load_dataset(args.dataset, expected_schema="features")
    result = _evaluate(model, dataset)
    print(json.dumps(result, sort_keys=True))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_sdg_mask(args) -> int:
    out = _require(args, "out")
    dataset = load_dataset(args.dataset, expected_schema="tokens")
    count = 0
    with open(out, "w", encoding="utf-8") as fh:
        for ex in dataset.examples:
            proposals = select_masks(ex.tokens, args.rule)
            rec = {"id": ex.id, "proposals": [proposal_record(p) for p in proposals]}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            count += len(proposals)
    print(f"rule {args.rule}: {count} proposals over {len(dataset)} sentences -> {out}")
    return 0


def _cmd_run(args) -> int:
    doc = _overlay_pipeline_flags(_load_config_doc(args), args)
    config = config_from_dict(doc)
    result = run_pipeline(config)
    counts = result.report["counts"]
    print(
        f"kept {counts['kept']} (overwrote {counts['overwritten']}),"
        f" removed {counts['removed']} of {counts['input_size']}"
    )
    if result.report.get("detection"):
        d = result.report["detection"]
        print(f"detection precision {d['precision']:.3f}, recall {d['recall']:.3f}")
    if result.report.get("evaluation"):
        e = result.report["evaluation"]
        print(
            f"test accuracy {e['baseline']['accuracy']:.3f} -> {e['cleaned']['accuracy']:.3f}"
        )
    print(f"report: {Path(config.out_dir) / 'report.json'}")
    return 0


_COMMANDS = {
    "make-data": _cmd_make_data,
    "inject-noise": _cmd_inject_noise,
    "train": _cmd_train,
    "mcd-infer": _cmd_mcd_infer,
    "build-sentinel": _cmd_build_sentinel,
    "decide": _cmd_decide,
    "apply": _cmd_apply,
    "sweep": _cmd_sweep,
    "evaluate": _cmd_evaluate,
    "sdg-mask": _cmd_sdg_mask,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are validation failures here
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except (DataFormatError, ValueError, json.JSONDecodeError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except PipelineError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
