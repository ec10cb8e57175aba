"""Resonances of the Gauss or Schottky transfer matrix at one s, in (log|lambda|, arg lambda)."""

import argparse
from pathlib import Path

import numpy as np

from ruelle.ifs import build_example_schottky, build_gauss_ifs
from ruelle.io import SvgPlot, write_csv
from ruelle.transfer import SpectralParams, spectrum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--system", default="gauss3", help="gaussN or schottky")
    ap.add_argument("--a", type=float, default=1.0)
    ap.add_argument("--b", type=float, default=100.0)
    ap.add_argument("--nodes", type=int)
    ap.add_argument("--out", default="results/spectrum")
    args = ap.parse_args()
    out = Path(args.out)

    ifs = build_example_schottky() if args.system == "schottky" else build_gauss_ifs(int(args.system[5:]))
    rs = spectrum(ifs, SpectralParams(args.a, args.b), args.nodes)
    ev = rs.stable_eigenvalues
    print(f"{ev.size} stable of {len(rs)} eigenvalues (M = {rs.M} vs {rs.refined_M})")
    for e in ev[:10]:
        print(f"  {e.real: .10f} {e.imag:+.10f}i   log|.| = {np.log(abs(e)):.4f}")
    write_csv(out / "spectrum.csv", ["re", "im", "log_modulus", "arg"],
              [[e.real, e.imag, np.log(abs(e)), np.angle(e)] for e in ev])
    SvgPlot(title=f"{args.system}, s = {args.a:g} + {args.b:g}i", xlabel="log|lambda|", ylabel="arg lambda") \
        .scatter(np.log(np.abs(ev)), np.angle(ev)).save(out / "spectrum.svg")


if __name__ == "__main__":
    main()
