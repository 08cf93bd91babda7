"""Command-line interface.

One subcommand per pipeline stage: permute, augment, make-eval, score,
aggregate, report, train-toy, predict-toy, grad-check. Every randomized
subcommand requires an explicit --seed so each output is replayable;
exit codes are 0 (success), 1 (usage error), 2 (data error).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import augment as aug
from . import dataset_io as dio
from . import evalsets
from . import model as toy
from . import permute as perm
from . import scoring
from .records import default_target_components
from .rng import derive_seed

log = logging.getLogger("fival")

USAGE_ERROR = 1
DATA_ERROR = 2

_DATA_ERRORS = (
    perm.EmptyInput,
    perm.NotPermutable,
    perm.ResampleBudgetExceeded,
    dio.ParseError,
    aug.NothingPermutable,
    aug.UnsupportedTask,
    scoring.MissingPrediction,
    scoring.DuplicatePrediction,
    scoring.KeyMismatch,
    scoring.EmptyReport,
    scoring.UnknownHeuristic,
    toy.ShapeError,
    toy.Divergence,
    toy.VocabMismatch,
    ValueError,
    KeyError,
    OSError,
    json.JSONDecodeError,
)


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit code 2; this CLI uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _add_io(parser, output_default=None):
    parser.add_argument("--input", required=True, help="input file path")
    parser.add_argument("--output", default=output_default,
                        help="output path (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fival", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("permute", parents=[], parser_class=_Parser,
                       help="permute text n-gram chunks")
    p.add_argument("text", nargs="?",
                   help="text to permute (default: read lines from --input "
                        "or stdin)")
    p.add_argument("--input", help="file with one text per line")
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--n", type=int, choices=(1, 2, 3), required=True,
                   help="n-gram chunk size")
    p.add_argument("--mode", choices=perm.MODES, default="differs",
                   help="permutation constraint (default: %(default)s)")
    p.add_argument("--seed", type=int, required=True,
                   help="seed (required: outputs must be replayable)")

    p = sub.add_parser("augment", parser_class=_Parser,
                       help="build an invalid-augmented train/dev split")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True,
                   help="output directory (train.jsonl, dev.jsonl, "
                        "manifest.json)")
    p.add_argument("--format", default="jsonl", choices=dio.FORMATS)
    p.add_argument("--preset", help="GLUE column preset for --format "
                                    "glue_tsv")
    p.add_argument("--ratio", type=float, default=1.0,
                   help="invalid per valid record (default: %(default)s)")
    p.add_argument("--n", type=int, choices=(1, 2, 3), action="append",
                   help="n-gram size; repeat for several (default: 1 2 3)")
    p.add_argument("--mode", choices=perm.MODES, default="differs")
    p.add_argument("--components", help="comma-separated target components "
                                        "(default: task-specific)")
    p.add_argument("--invalid-label-mode", choices=("single",
                                                    "per_component"),
                   default="single")
    p.add_argument("--min-words", type=int, default=3)
    p.add_argument("--split-fraction", type=float, default=0.9)
    p.add_argument("--split-before-augment", action="store_true")
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("make-eval", parser_class=_Parser,
                       help="build permuted evaluation variants")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--format", default="jsonl", choices=dio.FORMATS)
    p.add_argument("--preset")
    p.add_argument("--components", required=True,
                   help="comma-separated components to permute")
    p.add_argument("--n", type=int, choices=(1, 2, 3), action="append",
                   help="n-gram size; repeat for several (default: 1 2 3)")
    p.add_argument("--mode", choices=perm.MODES, default="differs")
    p.add_argument("--min-words", type=int, default=3,
                   help="drop records under this many words first "
                        "(0 disables)")
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("score", parser_class=_Parser,
                       help="score a prediction file against an eval set")
    p.add_argument("--input", required=True, help="eval set (jsonl)")
    p.add_argument("--predictions", required=True)
    p.add_argument("--output", help="report CSV (default: stdout)")
    p.add_argument("--metric", choices=("standard", "em", "hans"),
                   default="standard",
                   help="standard = accuracy+pct_invalid; em = exact "
                        "match (QA); hans = per-heuristic table")
    p.add_argument("--invalid-labels", default="invalid",
                   help="comma-separated invalid label names")
    p.add_argument("--dataset", default="", help="dataset name for rows")
    p.add_argument("--variant", default="dev", help="variant name for rows")

    p = sub.add_parser("aggregate", parser_class=_Parser,
                       help="aggregate per-seed report CSVs")
    p.add_argument("--input", required=True, nargs="+",
                   help="two or more report CSVs")
    p.add_argument("--output", help="aggregated CSV (default: stdout)")

    p = sub.add_parser("report", parser_class=_Parser,
                       help="render a report CSV as markdown or SVG")
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="default: stdout")
    p.add_argument("--report-format", choices=("csv", "markdown",
                                               "svg_bars"),
                   default="markdown")

    p = sub.add_parser("train-toy", parser_class=_Parser,
                       help="train the attention classifier")
    p.add_argument("--input", required=True, help="train records (jsonl)")
    p.add_argument("--dev", required=True, help="dev records (jsonl)")
    p.add_argument("--output", required=True, help="checkpoint path")
    p.add_argument("--labels", help="comma-separated label space "
                                    "(default: labels seen in training)")
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("predict-toy", parser_class=_Parser,
                       help="write predictions for an eval file")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--input", required=True, help="records (jsonl)")
    p.add_argument("--output", required=True, help="prediction file")

    p = sub.add_parser("grad-check", parser_class=_Parser,
                       help="compare analytic vs numeric gradients")
    p.add_argument("--threshold", type=float, default=1e-4)

    return parser


def _read_records(args) -> list:
    preset = getattr(args, "preset", None)
    return list(dio.read_dataset(args.input, args.format, preset=preset))


def _components(arg: str | None) -> tuple[str, ...] | None:
    if not arg:
        return None
    return tuple(name.strip() for name in arg.split(",") if name.strip())


def _write_bytes(data: bytes, output: str | None) -> None:
    if output:
        Path(output).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def _cmd_permute(args) -> int:
    spec = perm.PerturbationSpec(args.n, args.mode, args.seed)
    if args.text is not None:
        texts = [args.text]
    elif args.input:
        texts = Path(args.input).read_text(encoding="utf-8-sig").splitlines()
    else:
        texts = sys.stdin.read().splitlines()
    lines = []
    for i, text in enumerate(texts):
        seed = spec.seed if len(texts) == 1 else derive_seed(
            spec.seed, "line", i)
        lines.append(perm.permute(
            text, perm.PerturbationSpec(args.n, args.mode, seed)))
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    _write_bytes(payload, args.output)
    return 0


def _cmd_augment(args) -> int:
    records = _read_records(args)
    config = aug.AugmentConfig(
        master_seed=args.seed,
        ratio=args.ratio,
        n_set=tuple(args.n) if args.n else (1, 2, 3),
        invalid_label_mode=args.invalid_label_mode,
        target_components=_components(args.components),
        min_words=args.min_words,
        split_fraction=args.split_fraction,
        mode=args.mode,
        split_before_augment=args.split_before_augment,
    )
    targets = (config.target_components
               or default_target_components(records[0].task))
    filtered, stats = dio.filter_min_words(records, config.min_words,
                                           targets)
    if stats.used_count < stats.original_count:
        log.info("min-word filter kept %d of %d records",
                 stats.used_count, stats.original_count)
    result = aug.augment(filtered, config)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    dio.write_dataset(result.train, out / "train.jsonl", "jsonl")
    dio.write_dataset(result.dev, out / "dev.jsonl", "jsonl")
    (out / "manifest.json").write_text(result.manifest.to_json(),
                                       encoding="utf-8")
    log.info("wrote %d train / %d dev records to %s",
             len(result.train), len(result.dev), out)
    return 0


def _cmd_make_eval(args) -> int:
    records = _read_records(args)
    components = _components(args.components)
    if args.min_words:
        records, stats = dio.filter_min_words(records, args.min_words,
                                              components)
        if stats.used_count < stats.original_count:
            log.info("min-word filter kept %d of %d records",
                     stats.used_count, stats.original_count)
    build = evalsets.build_eval_sets(
        records, components, tuple(args.n) if args.n else (1, 2, 3),
        args.seed, mode=args.mode,
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for variant in build.order:
        dio.write_dataset(build.variants[variant.name],
                          out / f"{variant.name}.jsonl", "jsonl")
    manifest = {
        "seed": args.seed,
        "variants": {v.name: len(build.variants[v.name])
                     for v in build.order},
        "dropped": build.dropped,
    }
    (out / "eval_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    return 0


def _cmd_score(args) -> int:
    records = list(dio.read_dataset(args.input, "jsonl"))
    predictions = scoring.read_predictions(args.predictions)
    invalid = tuple(_components(args.invalid_labels) or ())
    if args.metric == "em":
        rows = scoring.score_drop_em(records, predictions, invalid,
                                     dataset=args.dataset,
                                     variant=args.variant)
    elif args.metric == "hans":
        rows = scoring.score_hans(records, predictions,
                                  dataset=args.dataset or "hans")
    else:
        rows = scoring.score(records, predictions, invalid,
                             dataset=args.dataset, variant=args.variant)
    _write_bytes(scoring.render_csv(rows), args.output)
    return 0


def _cmd_aggregate(args) -> int:
    reports = [scoring.read_report_csv(path) for path in args.input]
    rows = scoring.aggregate(reports)
    _write_bytes(scoring.render_csv(rows), args.output)
    return 0


def _cmd_report(args) -> int:
    rows = scoring.read_report_csv(args.input)
    _write_bytes(scoring.render_report(rows, args.report_format),
                 args.output)
    return 0


def _cmd_train_toy(args) -> int:
    train_records = list(dio.read_dataset(args.input, "jsonl"))
    dev_records = list(dio.read_dataset(args.dev, "jsonl"))
    config = toy.ModelConfig(
        embed_dim=args.embed_dim, max_len=args.max_len,
        learning_rate=args.learning_rate, batch_size=args.batch_size,
        max_epochs=args.max_epochs, patience=args.patience, seed=args.seed,
    )
    labels = _components(args.labels)
    bundle, report = toy.train(config, train_records, dev_records,
                               label_space=labels)
    toy.save_checkpoint(bundle, args.output)
    for epoch, (loss, acc) in enumerate(zip(report.train_loss,
                                            report.dev_accuracy), start=1):
        log.info("epoch %d: train loss %.4f, dev accuracy %.4f",
                 epoch, loss, acc)
    print(json.dumps(dataclasses.asdict(report), sort_keys=True))
    return 0


def _cmd_predict_toy(args) -> int:
    bundle = toy.load_checkpoint(args.model)
    records = list(dio.read_dataset(args.input, "jsonl"))
    predictions = toy.predict(bundle, records)
    scoring.write_predictions(predictions, args.output)
    log.info("wrote %d predictions to %s", len(predictions), args.output)
    return 0


def _cmd_grad_check(args) -> int:
    error = toy.grad_check()
    status = "PASS" if error < args.threshold else "FAIL"
    print(f"{status} max relative gradient error: {error:.3e} "
          f"(threshold {args.threshold:g})")
    return 0 if status == "PASS" else DATA_ERROR


_COMMANDS = {
    "permute": _cmd_permute,
    "augment": _cmd_augment,
    "make-eval": _cmd_make_eval,
    "score": _cmd_score,
    "aggregate": _cmd_aggregate,
    "report": _cmd_report,
    "train-toy": _cmd_train_toy,
    "predict-toy": _cmd_predict_toy,
    "grad-check": _cmd_grad_check,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s",
                        level=logging.INFO)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _DATA_ERRORS as exc:
        log.error("%s", exc)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
