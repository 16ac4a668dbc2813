"""Batch command-line frontend.

Subcommands: evaluate, baseline build|predict, ablate, compare, synth,
convert.  Exit codes: 0 success, 1 usage error, 2 data or contract error.
Reports go to stdout unless --out is given; file reports get a JSON run
manifest written next to them (input checksums, resolved config, version,
wall-clock duration).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

from . import __version__
from .ablation import AblationLevel, FrequencySource, PredictionFileSource, run_ablation
from .adapters import AdapterManifest, convert
from .compare import ensemble_matrix, format_matrix, similarity_matrix
from .core import EvalConfig, MODES, TASKS
from .errors import ConfigError, SgEvalError
from .freq import build_prior, predict_split, read_prior, write_prior
from .ingest import (REPORT_FORMATS, file_checksum, format_report, read_scene_graphs,
                     read_vocabulary, write_scene_graphs, write_vocabulary)
from .oi import oi_evaluate
from .synth import SynthConfig, generate, synth_vocabulary, write_corruptions
from .vg import vg_recall


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _comma_ints(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"K values must be positive, got {text!r}")
    return values


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    inputs: dict[str, str]
    version: str
    duration_seconds: float

    def to_json(self) -> str:
        payload = {
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": self.inputs,
            "version": self.version,
            "duration_seconds": self.duration_seconds,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_manifest(path: str, subcommand: str, config: dict, input_paths: list[str],
                    started: float) -> None:
    manifest = RunManifest(
        subcommand=subcommand,
        config=config,
        inputs={p: file_checksum(p) for p in sorted(set(input_paths))},
        version=__version__,
        duration_seconds=time.monotonic() - started,
    )
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(manifest.to_json())


def _emit(text: str, args, subcommand: str, config: dict, input_paths: list[str],
          started: float) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        _write_manifest(args.out + ".manifest.json", subcommand, config, input_paths, started)
    else:
        sys.stdout.write(text)


def _add_eval_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--task", choices=TASKS, default=None)
    parser.add_argument("--mode", choices=MODES, default=None)
    parser.add_argument("--max-predicates", type=int, default=None,
                        help="predicates per pair in unconstrained mode")
    parser.add_argument("--k", type=_comma_ints, default=None,
                        help="comma-separated recall cutoffs (default 20,50,100)")
    parser.add_argument("--iou-threshold", type=float, default=None)
    parser.add_argument("--config", default=None,
                        help="optional JSON file with evaluation settings; flags win")


def _resolve_eval_config(args, dataset: str | None = None) -> EvalConfig:
    layered: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot parse config file {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        for key in ("task", "mode", "max_predicates_per_pair", "iou_threshold"):
            if key in data:
                layered[key] = data[key]
        if "k_values" in data:
            layered["k_values"] = tuple(data["k_values"])
    if dataset == "oi":
        layered.setdefault("mode", "unconstrained")
        layered.setdefault("max_predicates_per_pair", 2)
    if args.task is not None:
        layered["task"] = args.task
    if args.mode is not None:
        layered["mode"] = args.mode
    if args.max_predicates is not None:
        layered["max_predicates_per_pair"] = args.max_predicates
    if getattr(args, "k", None) is not None:
        layered["k_values"] = args.k
    if args.iou_threshold is not None:
        layered["iou_threshold"] = args.iou_threshold
    return EvalConfig(**layered)


def _config_dict(config: EvalConfig, extra: dict | None = None) -> dict:
    out = {
        "task": config.task,
        "mode": config.mode,
        "max_predicates_per_pair": config.max_predicates_per_pair,
        "k_values": list(config.k_values),
        "iou_threshold": config.iou_threshold,
    }
    if extra:
        out.update(extra)
    return out


def _cmd_evaluate(args) -> int:
    started = time.monotonic()
    vocabulary = read_vocabulary(args.vocab)
    preds = read_scene_graphs(args.pred, vocabulary)
    gts = read_scene_graphs(args.gt, vocabulary)
    config = _resolve_eval_config(args, dataset=args.dataset)
    if args.dataset == "vg":
        table = vg_recall(preds, gts, config, threads=args.threads).as_table()
    else:
        table = oi_evaluate(preds, gts, config, threads=args.threads,
                            micro_recall=args.micro_recall).as_table()
    inputs = [args.pred, args.gt, args.vocab] + ([args.config] if args.config else [])
    extra = {"dataset": args.dataset, "threads": args.threads}
    if args.dataset == "oi":
        extra["micro_recall"] = args.micro_recall
    _emit(format_report(table, args.format), args, "evaluate",
          _config_dict(config, extra), inputs, started)
    return 0


def _cmd_baseline_build(args) -> int:
    started = time.monotonic()
    vocabulary = read_vocabulary(args.vocab)
    train = read_scene_graphs(args.train, vocabulary)
    variant = args.variant.replace("-", "_")
    prior = build_prior(train, variant)
    write_prior(prior, args.prior_out, vocabulary)
    table = {
        "label_pairs": float(len(prior.counts)),
        "total_count": float(sum(c for _, preds in prior.counts for _, c in preds)),
    }
    _emit(format_report(table, args.format), args, "baseline build",
          {"variant": variant, "prior_out": args.prior_out},
          [args.train, args.vocab], started)
    return 0


def _cmd_baseline_predict(args) -> int:
    started = time.monotonic()
    vocabulary = read_vocabulary(args.vocab)
    detections = read_scene_graphs(args.detections, vocabulary)
    variant = args.variant.replace("-", "_")
    prior = read_prior(args.prior, vocabulary, variant=variant)
    config = _resolve_eval_config(args)
    predictions = predict_split(detections, prior, config, use_raw_counts=args.raw_counts)
    write_scene_graphs(predictions, args.predictions_out, vocabulary)
    inputs = [args.detections, args.vocab, args.prior] + ([args.config] if args.config else [])
    _write_manifest(args.predictions_out + ".manifest.json", "baseline predict",
                    _config_dict(config, {"variant": variant, "raw_counts": args.raw_counts}),
                    inputs, started)
    return 0


def _build_relation_source(args, vocabulary, config):
    name = args.relations
    if name in ("freq", "freq-overlap"):
        variant = name.replace("-", "_")
        if args.prior:
            prior = read_prior(args.prior, vocabulary, variant=variant)
        elif args.train:
            prior = build_prior(read_scene_graphs(args.train, vocabulary), variant)
        else:
            raise ConfigError("frequency relation sources need --prior or --train")
        return FrequencySource(prior, config, vocabulary.num_predicates)
    split = read_scene_graphs(name, vocabulary)
    return PredictionFileSource(split, vocabulary.num_predicates)


def _cmd_ablate(args) -> int:
    started = time.monotonic()
    vocabulary = read_vocabulary(args.vocab)
    gts = read_scene_graphs(args.gt, vocabulary)
    detections = read_scene_graphs(args.detections, vocabulary)
    config = _resolve_eval_config(args, dataset="oi" if args.metric == "oi" else None)
    levels = [AblationLevel.parse(part) for part in args.levels.split(",")]
    source = _build_relation_source(args, vocabulary, config)
    result = run_ablation(gts, detections, source, levels, args.metric, config,
                          threads=args.threads)
    inputs = [args.gt, args.detections, args.vocab]
    for maybe in (args.prior, args.train, args.config):
        if maybe:
            inputs.append(maybe)
    if args.relations not in ("freq", "freq-overlap"):
        inputs.append(args.relations)
    extra = {"metric": args.metric, "levels": [l.value for l in levels],
             "relations": args.relations, "threads": args.threads}
    _emit(format_report(result.as_table(), args.format), args, "ablate",
          _config_dict(config, extra), inputs, started)
    return 0


def _cmd_compare(args) -> int:
    started = time.monotonic()
    vocabulary = read_vocabulary(args.vocab)
    names = args.names.split(",") if args.names else None
    if names is not None and len(names) != len(args.inputs):
        raise ConfigError(f"{len(args.inputs)} inputs but {len(names)} names")
    named = []
    for i, path in enumerate(args.inputs):
        name = names[i] if names else os.path.splitext(os.path.basename(path))[0]
        named.append((name, read_scene_graphs(path, vocabulary, name=name)))
    if args.kind == "similarity":
        matrix = similarity_matrix(named, iou_identity=args.iou_identity)
    else:
        if not args.gt:
            raise ConfigError("--gt is required for ensemble comparison")
        gts = read_scene_graphs(args.gt, vocabulary)
        matrix = ensemble_matrix(named, gts)
    inputs = list(args.inputs) + [args.vocab] + ([args.gt] if args.gt else [])
    _emit(format_matrix(matrix), args, "compare",
          {"kind": args.kind, "models": list(matrix.names),
           "iou_identity": args.iou_identity},
          inputs, started)
    return 0


def _cmd_synth(args) -> int:
    started = time.monotonic()
    config = SynthConfig.from_json(args.config)
    result = generate(config)
    vocabulary = synth_vocabulary(config)
    os.makedirs(args.out, exist_ok=True)
    write_vocabulary(vocabulary, os.path.join(args.out, "vocabulary.txt"))
    write_scene_graphs(result.gt, os.path.join(args.out, "gt.tsv"), vocabulary)
    write_scene_graphs(result.detections, os.path.join(args.out, "detections.tsv"), vocabulary)
    write_scene_graphs(result.predictions, os.path.join(args.out, "predictions.tsv"), vocabulary)
    write_corruptions(result.corruptions, os.path.join(args.out, "corruptions.tsv"))
    _write_manifest(os.path.join(args.out, "synth.manifest.json"), "synth",
                    config.to_dict(), [args.config], started)
    return 0


def _cmd_convert(args) -> int:
    inputs = []
    for item in args.input:
        role, sep, path = item.partition("=")
        if not sep or not role or not path:
            raise ConfigError(f"--input must look like role=path, got {item!r}")
        inputs.append((role, path))
    manifest = AdapterManifest(source_format=args.format, inputs=tuple(inputs),
                               out_dir=args.out)
    report = convert(manifest)
    table = {}
    for counts in report.counts:
        table[f"{counts.name}.images"] = float(counts.images)
        table[f"{counts.name}.objects"] = float(counts.objects)
        table[f"{counts.name}.relations"] = float(counts.relations)
        table[f"{counts.name}.skipped_relations"] = float(counts.skipped_relations)
    sys.stdout.write(format_report(table, "tsv"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sgeval",
                     description="Scene-graph evaluation toolkit for serialized detections.")
    parser.add_argument("--version", action="version", version=f"sgeval {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="command")

    evaluate = sub.add_parser("evaluate", help="compute VG recall or OI metrics")
    evaluate.add_argument("--dataset", choices=("vg", "oi"), required=True)
    evaluate.add_argument("--pred", required=True)
    evaluate.add_argument("--gt", required=True)
    evaluate.add_argument("--vocab", required=True)
    evaluate.add_argument("--micro-recall", action="store_true",
                          help="pool OI Recall@50 over the dataset instead of per image")
    evaluate.add_argument("--threads", type=int, default=1)
    evaluate.add_argument("--out", default=None)
    evaluate.add_argument("--format", choices=REPORT_FORMATS, default="tsv")
    _add_eval_config_flags(evaluate)
    evaluate.set_defaults(handler=_cmd_evaluate)

    baseline = sub.add_parser("baseline", help="frequency-prior baselines")
    baseline_sub = baseline.add_subparsers(dest="baseline_command", metavar="action")

    build = baseline_sub.add_parser("build", help="count predicates over a training split")
    build.add_argument("--train", required=True)
    build.add_argument("--vocab", required=True)
    build.add_argument("--variant", choices=("freq", "freq-overlap"), default="freq")
    build.add_argument("--prior-out", required=True)
    build.add_argument("--out", default=None)
    build.add_argument("--format", choices=REPORT_FORMATS, default="tsv")
    build.set_defaults(handler=_cmd_baseline_build)

    predict = baseline_sub.add_parser("predict", help="emit prior-ranked relations")
    predict.add_argument("--prior", required=True)
    predict.add_argument("--detections", required=True)
    predict.add_argument("--vocab", required=True)
    predict.add_argument("--variant", choices=("freq", "freq-overlap"), default="freq")
    predict.add_argument("--raw-counts", action="store_true",
                         help="rank by raw counts instead of probabilities")
    predict.add_argument("--predictions-out", required=True)
    _add_eval_config_flags(predict)
    predict.set_defaults(handler=_cmd_baseline_predict)

    ablate = sub.add_parser("ablate", help="ground-truth substitution study")
    ablate.add_argument("--gt", required=True)
    ablate.add_argument("--detections", required=True)
    ablate.add_argument("--vocab", required=True)
    ablate.add_argument("--relations", required=True,
                        help="'freq', 'freq-overlap', or a predictions TSV path")
    ablate.add_argument("--prior", default=None)
    ablate.add_argument("--train", default=None)
    ablate.add_argument("--levels", default="predicted,gt-objects,gt-pairs")
    ablate.add_argument("--metric", choices=("vg", "oi"), default="oi")
    ablate.add_argument("--threads", type=int, default=1)
    ablate.add_argument("--out", default=None)
    ablate.add_argument("--format", choices=REPORT_FORMATS, default="tsv")
    _add_eval_config_flags(ablate)
    ablate.set_defaults(handler=_cmd_ablate)

    cmp_parser = sub.add_parser("compare", help="model similarity / ensemble matrices")
    cmp_parser.add_argument("--inputs", nargs="+", required=True)
    cmp_parser.add_argument("--names", default=None, help="comma-separated model names")
    cmp_parser.add_argument("--gt", default=None)
    cmp_parser.add_argument("--vocab", required=True)
    cmp_parser.add_argument("--kind", choices=("similarity", "ensemble"), default="similarity")
    cmp_parser.add_argument("--iou-identity", action="store_true",
                            help="match instances by IoU instead of exact boxes")
    cmp_parser.add_argument("--out", default=None)
    cmp_parser.set_defaults(handler=_cmd_compare)

    synth = sub.add_parser("synth", help="generate synthetic splits with labeled noise")
    synth.add_argument("--config", required=True)
    synth.add_argument("--out", required=True)
    synth.set_defaults(handler=_cmd_synth)

    convert_parser = sub.add_parser("convert", help="convert public annotation formats")
    convert_parser.add_argument("--format", choices=("vg-sgg-h5", "oi-vrd-csv"), required=True)
    convert_parser.add_argument("--input", action="append", default=[],
                                metavar="ROLE=PATH", help="may repeat")
    convert_parser.add_argument("--out", required=True)
    convert_parser.set_defaults(handler=_cmd_convert)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_usage(sys.stderr)
        sys.stderr.write("sgeval: error: a command is required\n")
        return 1
    try:
        return handler(args)
    except SgEvalError as exc:
        sys.stderr.write(f"sgeval: error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"sgeval: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
