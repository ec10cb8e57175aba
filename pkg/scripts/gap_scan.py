"""Largest stable resonance modulus of L_{a+ib} against b, next to the damping bound gamma_plus."""

import argparse
from pathlib import Path

import numpy as np

from ruelle.analysis import damping_gamma_plus, spectral_radius_scan
from ruelle.ifs import build_gauss_ifs
from ruelle.io import SvgPlot, write_csv
from ruelle.potentials import gkw_potential


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--branches", type=int, default=3)
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--b-max", type=float, default=600.0)
    ap.add_argument("--steps", type=int, default=25)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/gap_scan")
    args = ap.parse_args()
    out = Path(args.out)

    ifs = build_gauss_ifs(args.branches)
    gp = damping_gamma_plus(ifs, gkw_potential(ifs, args.a), 10).gamma_plus
    scan = spectral_radius_scan(ifs, args.a, np.linspace(0, args.b_max, args.steps), gamma_plus=gp,
                                workers=args.workers)
    for r in scan.rows:
        print(f"b = {r.b:7.1f}  M = {r.M:4d}  max log|lambda| = {r.max_log_modulus:8.4f}")
    print(f"gamma_plus = {gp:.6f}")
    write_csv(out / "gap_scan.csv", ["b", "M", "max_log_modulus", "n_stable"],
              [[r.b, r.M, r.max_log_modulus, r.n_stable] for r in scan.rows])
    SvgPlot(title="largest stable resonance", xlabel="log|lambda|", ylabel="b") \
        .scatter(scan.max_log_modulus, scan.b, r=3).vline(gp).save(out / "gap_scan.svg")


if __name__ == "__main__":
    main()
