"""Quantify how far a VOI center can drift before tracking collapses.

Builds a clean single-lesion-per-case phantom cohort, evaluates it with the
center-biased synthetic segmenter at zero noise, then re-centers each VOI at
increasing distances from the true centroid and reports the outcome mix per
displacement magnitude. With detection radius 20 mm and a 5 mm transition
band, correctness holds through 15 mm and collapses to all-FalseNegative by
30 mm; the printed table makes the cliff visible.
"""

import argparse
import sys
from pathlib import Path

from lesiontrack.experiments import (
    ExperimentConfig,
    SegmenterSpec,
    run_displacement_sweep,
    run_longitudinal_eval,
)
from lesiontrack.phantom import PhantomConfig, RegErrorModel, generate_dataset
from lesiontrack.report import write_sweep_outputs
from lesiontrack.segmenters import CenterBiasParams
from lesiontrack.voi import VoiSpec

ONLY_STABLE = {
    "stable": 1.0, "grow": 0.0, "shrink": 0.0, "resolve": 0.0,
    "new": 0.0, "merge": 0.0, "split": 0.0,
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("sweep_output"))
    ap.add_argument("--lesions", type=int, default=30)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    pcfg = PhantomConfig(
        volume_dims=(96, 96, 96),
        spacing=(1.0, 1.0, 1.0),
        lesion_count_range=(1, 1),
        transition_mix=ONLY_STABLE,
        reg_error=RegErrorModel(prob_inlier=1.0, inlier_sigma_mm=0.0, tail_scale_mm=1.0),
        seed=args.seed,
    )
    manifest = generate_dataset(pcfg, args.lesions, args.out / "data")

    cfg = ExperimentConfig(
        manifest_path=str(manifest),
        output_dir=str(args.out / "sweep"),
        segmenter=SegmenterSpec(kind="synthetic", params=CenterBiasParams(seed=args.seed)),
        # wide enough that displaced VOIs never clip a lesion at the 50 mm extreme
        voi=VoiSpec(shape=(128, 128, 128)),
        top_k=args.lesions,
        seed=args.seed,
        workers=args.workers,
    )
    base = run_longitudinal_eval(cfg)
    sweep = run_displacement_sweep(cfg, base.records)
    write_sweep_outputs(cfg, sweep)

    print(f"{'eps (mm)':>8}  {'correct':>8}  {'false neg':>9}  {'incorrect':>9}  {'mean dice':>9}")
    for eps in sweep.epsilon_mm:
        counts = sweep.outcome_counts_by_eps[eps]
        n = sum(counts.values())
        dice = sweep.mean_dice_by_eps[eps]
        dice_txt = f"{dice:.3f}" if dice is not None else "-"
        print(
            f"{eps:8.1f}  {counts['Correct'] / n:8.1%}  {counts['FalseNegative'] / n:9.1%}"
            f"  {counts['IncorrectAssignment'] / n:9.1%}  {dice_txt:>9}"
        )
    print(f"\noutputs: {cfg.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
