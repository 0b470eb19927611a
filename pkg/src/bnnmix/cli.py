"""Command-line interface for the experiment drivers.

Exit codes: 0 on success, 2 when some cells failed but partial output was
written, 1 on fatal errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import experiments
from .selftest import run_selftest

RUNNERS = {
    "predict": experiments.run_predict,
    "heatmap": experiments.run_heatmap,
    "pdf-dump": experiments.run_pdf_dump,
    "variance-scaling": experiments.run_variance_scaling,
    "optimality-gap": experiments.run_optimality_gap,
    "prior-comparison": experiments.run_prior_comparison,
    "classify": experiments.run_classify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bnnmix",
        description="Gaussian-mixture posterior predictive experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--config", help="JSON config file", default=None)
        cmd.add_argument("--seed", type=int, default=None, help="master seed")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--threads", type=int, default=1, help="parallel cells")
        cmd.add_argument(
            "--threshold", type=float, default=None, help="significant-weight cutoff"
        )
    selftest = sub.add_parser("selftest", help="run the built-in oracle checks")
    selftest.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args) -> experiments.ExperimentConfig:
    if args.config:
        cfg = experiments.ExperimentConfig.from_json(args.config)
    else:
        cfg = experiments.ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    return replace(cfg, **overrides) if overrides else cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return 1 if run_selftest(args.seed) else 0
    try:
        cfg = _load_config(args)
        result = RUNNERS[args.command](cfg, threads=args.threads)
    except Exception as exc:  # noqa: BLE001 - fatal CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in result.files:
        print(path)
    if result.n_errors:
        print(
            f"warning: {result.n_errors} cell(s) failed; partial output written",
            file=sys.stderr,
        )
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
