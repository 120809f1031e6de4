"""Command-line entry points.

Three subcommands cover the full workflow:

* ``lesiontrack gen-phantom --config cfg.toml --out DIR`` writes a synthetic
  longitudinal dataset plus its manifest.
* ``lesiontrack eval --config cfg.toml`` runs the longitudinal evaluation
  and writes the outcomes CSV, figure data, and run metadata.
* ``lesiontrack sweep --config cfg.toml --baseline outcomes.csv`` runs the
  VOI displacement sweep over the top-k lesions of a previous run.

``--seed`` and ``--workers`` override the config file. Exit codes: 0 on
success, 2 for configuration problems, 3 for data problems.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import __version__
from .config import experiment_config_from_file, phantom_run_from_file
from .errors import ConfigError, LesionTrackError
from .experiments import run_displacement_sweep, run_longitudinal_eval
from .phantom import generate_dataset
from .report import read_outcomes_csv, write_eval_outputs, write_sweep_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LesionTrackError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lesiontrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-phantom", help="generate a synthetic longitudinal dataset")
    gen.add_argument("--config", required=True, help="TOML/JSON generator config")
    gen.add_argument("--out", required=True, help="output dataset directory")
    gen.add_argument("--seed", type=int, default=None, help="override the config seed")
    gen.set_defaults(func=_cmd_gen_phantom)

    ev = sub.add_parser("eval", help="run the longitudinal evaluation")
    ev.add_argument("--config", required=True, help="TOML/JSON experiment config")
    ev.add_argument("--out", default=None, help="override the config output directory")
    ev.add_argument("--seed", type=int, default=None, help="override the config seed")
    ev.add_argument("--workers", type=int, default=None, help="override the worker count")
    ev.set_defaults(func=_cmd_eval)

    sw = sub.add_parser("sweep", help="run the VOI displacement sweep")
    sw.add_argument("--config", required=True, help="TOML/JSON experiment config")
    sw.add_argument("--baseline", required=True, help="outcomes.csv from a previous eval run")
    sw.add_argument("--out", default=None, help="override the config output directory")
    sw.add_argument("--seed", type=int, default=None, help="override the config seed")
    sw.add_argument("--workers", type=int, default=None, help="override the worker count")
    sw.set_defaults(func=_cmd_sweep)
    return parser


def _cmd_gen_phantom(args) -> int:
    cfg, n_cases = phantom_run_from_file(args.config, seed_override=args.seed)
    manifest_path = generate_dataset(cfg, n_cases, args.out)
    print(f"wrote {n_cases} cases under {args.out}")
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def _load_experiment(args):
    cfg = experiment_config_from_file(args.config, seed_override=args.seed, workers_override=args.workers)
    if args.out is not None:
        # command-line paths resolve against the caller's cwd, not the config
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    return cfg


def _cmd_eval(args) -> int:
    cfg = _load_experiment(args)
    summary = run_longitudinal_eval(cfg)
    out = write_eval_outputs(cfg, summary)
    for tp in ("baseline", "followup"):
        counts = summary.outcome_counts[tp]
        n = sum(counts.values())
        parts = ", ".join(f"{k}={v}" for k, v in counts.items() if v)
        print(f"{tp}: n={n} ({parts})" if n else f"{tp}: n=0")
    if summary.wilcoxon is not None:
        w = summary.wilcoxon
        print(f"wilcoxon (followup vs baseline dice): W={w.statistic:g} p={w.p_value:.3g} n={w.n_used} [{w.method}]")
    else:
        print(f"wilcoxon: degenerate ({summary.wilcoxon_degenerate})")
    for failure in summary.case_failures:
        print(f"case failed: {failure.case_id}: {failure.detail}", file=sys.stderr)
    print(f"outputs: {out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_experiment(args)
    baseline_records = read_outcomes_csv(args.baseline)
    summary = run_displacement_sweep(cfg, baseline_records)
    out = write_sweep_outputs(cfg, summary)
    for eps in summary.epsilon_mm:
        counts = summary.outcome_counts_by_eps[eps]
        n = sum(counts.values())
        correct = counts["Correct"] / n if n else 0.0
        mean_dice = summary.mean_dice_by_eps[eps]
        dice_txt = f"{mean_dice:.3f}" if mean_dice is not None else "-"
        print(f"eps={eps:g} mm: correct={correct:.1%} mean_dice={dice_txt} (n={n})")
    for failure in summary.case_failures:
        print(f"case failed: {failure.case_id}: {failure.detail}", file=sys.stderr)
    print(f"outputs: {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
