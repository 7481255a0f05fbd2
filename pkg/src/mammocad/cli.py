"""Command-line entry point: ``mammocad <stage> --out DIR [options]``.

Exit codes: 0 success, 2 configuration error, 3 synth, 4 extract,
5 select, 6 train, 7 eval, 8 report.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import pipeline
from .features import FeatureMatrix
from .pipeline import ConfigError, PipelineConfig, StageError

# flag -> config key
_OVERRIDES = {
    "seed": "seed",
    "split": "split",
    "bases": "bases",
    "levels": "levels",
    "ig_threshold": "ig_threshold",
    "top_k": "top_k",
    "bp_eta": "bp_eta",
    "bp_epochs": "bp_epochs",
    "bp_hidden": "bp_hidden",
    "bins": "bins",
    "manifest": "manifest",
    "resolution": "resolution",
}


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--config", help="JSON config file (defaults to OUT/config.json when present)")
    p.add_argument("--seed", type=int)
    p.add_argument("--split", type=float, help="train fraction in (0, 1)")
    p.add_argument("--bases", nargs="+", metavar="BASIS")
    p.add_argument("--levels", nargs=2, type=int, metavar=("LO", "HI"))
    p.add_argument("--ig-threshold", type=float)
    p.add_argument("--top-k", type=int)
    p.add_argument("--bp-eta", type=float)
    p.add_argument("--bp-epochs", type=int)
    p.add_argument("--bp-hidden", type=int)
    p.add_argument("--bins", type=int, help="discretization bins for feature selection")
    p.add_argument("--manifest", help="filename,label CSV of PGM images (skips synthesis)")
    p.add_argument("--resolution", type=int)
    p.add_argument("--n-normal", type=int)
    p.add_argument("--n-cancer", type=int)
    p.add_argument("--size", type=int, help="synthetic image height and width")
    p.add_argument("--workers", type=int, default=1, help="processes for feature extraction")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mammocad", description="Wavelet-feature mammogram classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    sub.add_parser("synth", parents=[common], help="generate a synthetic phantom corpus")
    sub.add_parser("extract", parents=[common], help="pre-process images and write feature CSVs")
    sub.add_parser("select", parents=[common], help="split rows and rank features by information gain")
    sub.add_parser("train", parents=[common], help="train LDA, BP and NB on the selected features")
    ev = sub.add_parser("eval", parents=[common], help="score the test rows and write reports")
    ev.add_argument("--features", nargs="+", metavar="CSV",
                    help="evaluate every row of these feature CSVs instead of the test split")
    sub.add_parser("run", parents=[common], help="run every stage")
    return parser


def resolve_config(args) -> PipelineConfig:
    """Defaults, then the config file, then command-line flags."""
    path = args.config
    if path is None and os.path.exists(os.path.join(args.out, "config.json")):
        path = os.path.join(args.out, "config.json")
    doc = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    config = PipelineConfig.from_dict(doc)
    for flag, key in _OVERRIDES.items():
        value = getattr(args, flag)
        if value is not None:
            setattr(config, key, list(value) if isinstance(value, list) else value)
    # a top-k request without an explicit threshold means pure top-k ranking
    if args.top_k is not None and args.ig_threshold is None:
        config.ig_threshold = None
    for flag, key in (("n_normal", "n_normal"), ("n_cancer", "n_cancer"), ("size", "height"), ("size", "width")):
        value = getattr(args, flag)
        if value is not None:
            setattr(config.synth, key, value)
    if args.workers < 1:
        raise ConfigError("workers must be >= 1")
    return config.validate()


def _execute(args, config: PipelineConfig) -> str | None:
    out = args.out
    cmd = args.command
    if cmd == "run":
        return pipeline.run_pipeline(config, out, args.workers)
    os.makedirs(out, exist_ok=True)
    pipeline.clear_failed(out)
    pipeline.write_config(config, out)
    try:
        if cmd == "synth":
            pipeline.guarded("synth", pipeline.stage_synth, config, out)
        elif cmd == "extract":
            pipeline.guarded("extract", pipeline.stage_extract, config, out, args.workers)
        elif cmd == "select":
            pipeline.guarded("select", pipeline.stage_select, config, out)
        elif cmd == "train":
            pipeline.guarded("train", pipeline.stage_train, config, out)
        elif cmd == "eval":
            test = None
            if args.features:
                test = pipeline.guarded("eval", lambda: FeatureMatrix.join(FeatureMatrix.read_csv(p) for p in args.features))
            reports = pipeline.guarded("eval", pipeline.stage_eval, config, out, test)
            return pipeline.guarded("report", pipeline.stage_report, out, reports)
    except StageError as exc:
        pipeline.mark_failed(out, exc)
        raise
    return None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return pipeline.STAGE_CODES["config"]
    try:
        table = _execute(args, config)
    except StageError as exc:
        print(f"{exc.stage} failed: {exc}", file=sys.stderr)
        return exc.exit_code
    if table:
        print(table, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
