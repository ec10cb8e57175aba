"""Hausdorff dimension of the restricted Gauss trapped set for N = 1..N_max branches."""

import argparse
from pathlib import Path

import numpy as np

from ruelle.ifs import build_gauss_ifs
from ruelle.io import SvgPlot, write_csv
from ruelle.pressure import hausdorff_dimension


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-branches", type=int, default=8)
    ap.add_argument("--depth", type=int, default=8)
    ap.add_argument("--out", default="results/dimension")
    args = ap.parse_args()
    out = Path(args.out)

    Ns = np.arange(1, args.max_branches + 1)
    rows = []
    for N in Ns:
        d = hausdorff_dimension(build_gauss_ifs(int(N)), depth=args.depth)
        rows.append([int(N), d.value, d.uncertainty])
        print(f"N = {N:2d}   dim = {d.value:.6f}  +/- {d.uncertainty:.1e}")
    write_csv(out / "dimension_vs_N.csv", ["N", "dimension", "uncertainty"], rows)
    dims = [r[1] for r in rows]
    SvgPlot(title="dim_H K against N", xlabel="N", ylabel="dimension") \
        .scatter(Ns, dims, r=3).line(Ns, dims, color="#1f77b4", width=1).save(out / "dimension_vs_N.svg")


if __name__ == "__main__":
    main()
