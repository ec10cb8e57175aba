"""Phase-space trapped set of the Gauss map from its periodic orbits, with the band -2/(1+x) < xi < 0."""

import argparse
from pathlib import Path

import numpy as np

from ruelle.ifs import build_gauss_ifs
from ruelle.io import SvgPlot, write_csv
from ruelle.phase import trapped_set_points
from ruelle.potentials import gkw_tau_prime


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--branches", type=int, default=3)
    ap.add_argument("--max-period", type=int, default=6)
    ap.add_argument("--out", default="results/trapped_set")
    args = ap.parse_args()
    out = Path(args.out)

    ifs = build_gauss_ifs(args.branches)
    tp = gkw_tau_prime(ifs)
    xs, xis, rows = [], [], []
    for p in range(1, args.max_period + 1):
        pts = trapped_set_points(ifs, tp, p)
        xs.append(pts.x)
        xis.append(pts.xi)
        rows += [[p, x, xi] for x, xi in zip(pts.x, pts.xi)]
    x, xi = np.concatenate(xs), np.concatenate(xis)
    inside = np.count_nonzero((xi < 0) & (xi > -2 / (1 + x)))
    print(f"{inside}/{len(x)} phase points inside the band")
    write_csv(out / "trapped_set.csv", ["period", "x", "xi"], rows)

    g = np.linspace(x.min(), x.max(), 200)
    SvgPlot(title=f"trapped set, N = {args.branches}", xlabel="x", ylabel="xi").scatter(x, xi, r=1.2) \
        .line(g, -2 / (1 + g), dash="5,3").line(g, 0 * g, dash="5,3").save(out / "trapped_set.svg")


if __name__ == "__main__":
    main()
