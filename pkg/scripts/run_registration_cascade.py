"""Show how registration error propagates into follow-up segmentation quality.

Generates a stable-lesion phantom cohort whose propagated centroids carry a
long-tail error mixture (70% near-Gaussian at 3 mm, 30% exponential at
12 mm), evaluates both timepoints with a segmenter whose boundary quality
degrades as the VOI center drifts off the lesion, and tests whether
follow-up Dice on correctly tracked lesions sits below baseline. Baseline
VOIs are centered on true centroids, so the comparison isolates the
propagation step.
"""

import argparse
import statistics
import sys
from pathlib import Path

from lesiontrack.experiments import ExperimentConfig, SegmenterSpec, run_longitudinal_eval
from lesiontrack.phantom import PhantomConfig, RegErrorModel, generate_dataset
from lesiontrack.report import write_eval_outputs
from lesiontrack.segmenters import CenterBiasParams
from lesiontrack.voi import VoiSpec

ONLY_STABLE = {
    "stable": 1.0, "grow": 0.0, "shrink": 0.0, "resolve": 0.0,
    "new": 0.0, "merge": 0.0, "split": 0.0,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("cascade_output"))
    ap.add_argument("--cases", type=int, default=25)
    ap.add_argument("--seed", type=int, default=314)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--noise-mm", type=float, default=8.0, help="boundary noise at full drift")
    args = ap.parse_args(argv)

    pcfg = PhantomConfig(
        lesion_count_range=(2, 3),
        min_separation_mm=30.0,
        transition_mix=ONLY_STABLE,
        reg_error=RegErrorModel(prob_inlier=0.7, inlier_sigma_mm=3.0, tail_scale_mm=12.0),
        seed=args.seed,
    )
    manifest = generate_dataset(pcfg, args.cases, args.out / "data")

    cfg = ExperimentConfig(
        manifest_path=str(manifest),
        output_dir=str(args.out / "eval"),
        segmenter=SegmenterSpec(
            kind="synthetic",
            params=CenterBiasParams(boundary_noise_mm=args.noise_mm, seed=args.seed),
        ),
        voi=VoiSpec(shape=(64, 64, 32)),
        seed=args.seed,
        workers=args.workers,
    )
    summary = run_longitudinal_eval(cfg)
    write_eval_outputs(cfg, summary)

    if summary.reg_errors_mm:
        errs = summary.reg_errors_mm
        print(f"registration error: n={len(errs)} median={statistics.median(errs):.2f} mm max={max(errs):.1f} mm")
    for tp in ("baseline", "followup"):
        counts = summary.outcome_counts[tp]
        dices = summary.dice_by_timepoint[tp]
        mean_txt = f"{statistics.mean(dices):.4f}" if dices else "-"
        print(f"{tp:9s} mean_dice={mean_txt}  " + "  ".join(f"{k}={v}" for k, v in counts.items() if v))
    print(f"paired lesions: {len(summary.paired)} (excluded: {summary.excluded_pairs})")
    if summary.wilcoxon is not None:
        w = summary.wilcoxon
        print(f"wilcoxon two-sided: W={w.statistic:g} p={w.p_value:.3g} n={w.n_used} [{w.method}]")
    else:
        print(f"wilcoxon: degenerate ({summary.wilcoxon_degenerate})")
    print(f"\noutputs: {cfg.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
