"""Command line interface.

Subcommands mirror the pipeline stages and share a run directory
convention; run-all chains them end to end. Exit codes: 0 success,
1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__, metrics, pipeline
from .errors import CorpaForgeError
from .lexicon import BUILTIN, dump_lexicon, load_lexicon

LEXICON_ENV = "CORPA_FORGE_LEXICON"

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_USAGE = 2


def _ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios must be three comma-separated numbers")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return values  # validity (sum to 1) is checked by SplitSpec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corpa-forge",
        description=(
            "Concept-vector labelling, clinically perturbed adversarial report "
            "synthesis, and robustness metrics for chest X-ray report corpora."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--lexicon",
        default=None,
        help=f"lexicon file or 'builtin' (env {LEXICON_ENV} overrides the default)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, run_dir: bool = True) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        if run_dir:
            cmd.add_argument("--out", default="corpa_run", type=Path,
                             help="run directory (default: corpa_run)")
            cmd.add_argument("--seed", type=int, default=2)
            cmd.add_argument("--workers", type=int, default=1)
        return cmd

    lex = sub.add_parser("lexicon", help="lexicon utilities")
    lex_sub = lex.add_subparsers(dest="lexicon_command", required=True)
    lex_dump = lex_sub.add_parser("dump", help="print the active lexicon as YAML")
    lex_dump.add_argument("--out", type=Path, default=None,
                          help="write to a file instead of stdout")

    ingest = add("ingest", "read reports and the pairing file into a manifest")
    ingest.add_argument("--reports", type=Path, required=True)
    ingest.add_argument("--pairing", type=Path, required=True)

    add("clean", "split, normalize and filter report sentences")
    extract = add("extract", "detect concepts and emit report vectors")
    extract.add_argument("--no-sentences", action="store_true",
                         help="omit per-sentence concept records")
    add("label", "canonicalize vectors and assign pathology labels")

    undersample = add("undersample", "One-Sided Selection on the labelled rows")
    undersample.add_argument("--majority", default=None,
                             help="majority class id (default: the summary class)")
    undersample.add_argument("--distance", default="hamming",
                             choices=["hamming", "euclidean"])

    split = add("split", "stratified train/val/test split")
    split.add_argument("--ratios", type=_ratios, default=(0.8, 0.1, 0.1),
                       help="train,val,test ratios (default 0.8,0.1,0.1)")
    split.add_argument("--input", default=pipeline.BALANCED,
                       help="row file to split (default: balanced.jsonl)")

    add("bank", "sample the concept-to-sentence bank from the test split")

    perturb = add("perturb", "generate inter/outer concept vector perturbations")
    perturb.add_argument("--k-inter", type=int, default=2)
    perturb.add_argument("--k-outer", type=int, default=2)

    add("synthesize", "rewrite reports to match perturbed vectors")
    add("prompts", "emit the prompt manifest for the image bridge")

    run = add("run-all", "run every stage from ingest to prompts")
    run.add_argument("--reports", type=Path, required=True)
    run.add_argument("--pairing", type=Path, required=True)
    run.add_argument("--k-inter", type=int, default=2)
    run.add_argument("--k-outer", type=int, default=2)
    run.add_argument("--ratios", type=_ratios, default=(0.8, 0.1, 0.1))
    run.add_argument("--majority", default=None)

    evaluate = add("evaluate", "score prediction files and render the report")
    evaluate.add_argument("--original", type=Path, required=True,
                          help="prediction CSV for the original test set")
    evaluate.add_argument("--adversarial", type=Path, default=None,
                          help="prediction CSV for the adversarial set")
    evaluate.add_argument("--records", type=Path, default=None,
                          help="perturbation record file "
                               "(default: <out>/perturbations.jsonl)")
    evaluate.add_argument("--curve", action="append", default=[],
                          metavar="NAME=FILE",
                          help="ASR curve file to integrate; repeatable")
    evaluate.add_argument("--adv-truth", default=metrics.ADV_TRUTH_BOTH,
                          choices=[metrics.ADV_TRUTH_BOTH, metrics.ADV_TRUTH_ORIGINAL])
    evaluate.add_argument("--format", default="table", choices=["table", "records"])
    evaluate.add_argument("--no-figures", action="store_true")
    return parser


def _config(args: argparse.Namespace) -> pipeline.RunConfig:
    lexicon_path = (
        args.lexicon
        if args.lexicon is not None
        else os.environ.get(LEXICON_ENV, BUILTIN)
    )
    cfg = pipeline.RunConfig(
        out_dir=Path(getattr(args, "out", "corpa_run")),
        lexicon_path=lexicon_path,
        seed=getattr(args, "seed", 2),
        workers=getattr(args, "workers", 1),
    )
    if getattr(args, "reports", None) is not None:
        cfg.reports_dir = args.reports
    if getattr(args, "pairing", None) is not None:
        cfg.pairing = args.pairing
    if getattr(args, "k_inter", None) is not None:
        cfg.k_inter = args.k_inter
    if getattr(args, "k_outer", None) is not None:
        cfg.k_outer = args.k_outer
    if getattr(args, "ratios", None) is not None:
        cfg.ratios = args.ratios
    if getattr(args, "majority", None) is not None:
        cfg.majority = args.majority
    if getattr(args, "distance", None) is not None:
        cfg.distance = args.distance
    if getattr(args, "no_sentences", False):
        cfg.emit_sentence_concepts = False
    return cfg


def _report_summary(stage: str, stats: dict) -> None:
    details = ", ".join(f"{k}={v}" for k, v in stats.items())
    print(f"{stage}: {details}", file=sys.stderr)


def _parse_curves(specs: list[str]) -> dict[str, Path]:
    curves: dict[str, Path] = {}
    for spec in specs:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise CorpaForgeError(f"--curve expects NAME=FILE, got {spec!r}")
        curves[name] = Path(path)
    return curves


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "lexicon":
            lexicon = load_lexicon(
                args.lexicon or os.environ.get(LEXICON_ENV, BUILTIN)
            )
            text = dump_lexicon(lexicon)
            if args.out is not None:
                args.out.write_text(text, encoding="utf-8")
            else:
                print(text, end="")
            return EXIT_OK

        cfg = _config(args)
        if args.command == "ingest":
            _report_summary("ingest", pipeline.stage_ingest(cfg))
        elif args.command == "clean":
            _report_summary("clean", pipeline.stage_clean(cfg))
        elif args.command == "extract":
            _report_summary("extract", pipeline.stage_extract(cfg))
        elif args.command == "label":
            _report_summary("label", pipeline.stage_label(cfg))
        elif args.command == "undersample":
            _report_summary("undersample", pipeline.stage_undersample(cfg))
        elif args.command == "split":
            _report_summary("split", pipeline.stage_split(cfg, args.input))
        elif args.command == "bank":
            _report_summary("bank", pipeline.stage_bank(cfg))
        elif args.command == "perturb":
            _report_summary("perturb", pipeline.stage_perturb(cfg))
        elif args.command == "synthesize":
            _report_summary("synthesize", pipeline.stage_synthesize(cfg))
        elif args.command == "prompts":
            _report_summary("prompts", pipeline.stage_prompts(cfg))
        elif args.command == "run-all":
            for stage, stats in pipeline.run_all(cfg).items():
                _report_summary(stage, stats)
        elif args.command == "evaluate":
            report = pipeline.run_evaluate(
                cfg,
                original_path=args.original,
                adversarial_path=args.adversarial,
                records_path=args.records,
                curves=_parse_curves(args.curve),
                adv_truth=args.adv_truth,
                render_figures=not args.no_figures,
            )
            if args.format == "table":
                print(metrics.format_table(report), end="")
            else:
                import json

                print(json.dumps(report.to_mapping(), indent=2, sort_keys=True))
            for warning in report.warnings:
                print(f"warning: {warning}", file=sys.stderr)
        else:  # pragma: no cover - argparse enforces the choices
            parser.error(f"unknown command {args.command!r}")
    except CorpaForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
