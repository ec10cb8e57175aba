"""Resonance counts above a log-modulus threshold against b, on log-log axes."""

import argparse
from pathlib import Path

import numpy as np

from ruelle.analysis import WEYL_THRESHOLD, weyl_counts, weyl_fit
from ruelle.ifs import build_gauss_ifs
from ruelle.io import SvgPlot, write_csv
from ruelle.pressure import hausdorff_dimension


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--branches", type=int, default=3)
    ap.add_argument("--b-min", type=float, default=50.0)
    ap.add_argument("--b-max", type=float, default=800.0)
    ap.add_argument("--steps", type=int, default=12)
    ap.add_argument("--threshold", type=float, default=WEYL_THRESHOLD)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/weyl")
    args = ap.parse_args()
    out = Path(args.out)

    ifs = build_gauss_ifs(args.branches)
    b, counts = weyl_counts(ifs, 1.0, np.geomspace(args.b_min, args.b_max, args.steps), args.threshold,
                            workers=args.workers)
    fit = weyl_fit(b, counts)
    dim = hausdorff_dimension(ifs).value
    for bb, c in zip(b, counts):
        print(f"b = {bb:8.2f}  N(b) = {c}")
    print(f"slope {fit.slope:.4f}, intercept {fit.intercept:.4f}, dim_H K = {dim:.4f}")
    write_csv(out / "weyl.csv", ["b", "count"], zip(b, counts))
    lb = np.log(b)
    SvgPlot(title="fractal Weyl law", xlabel="log b", ylabel="log N(b)").scatter(lb, np.log(counts), r=3) \
        .line(lb, fit.slope * lb + fit.intercept).line(lb, dim * (lb - lb[0]) + np.log(counts[0]), color="#555555",
                                                       dash="4,3").save(out / "weyl.svg")


if __name__ == "__main__":
    main()
