#!/usr/bin/env python3
"""Regularity of the positive evolution of min-parabolas across t: C^{1,1} constants and failure flags.

Writes a CSV with one row per t (t, semiconcave constant, semiconvex constant, fail) to --out.
"""

import argparse

import numpy as np

from sconclab import io
from sconclab.evolution import regularity_probe
from sconclab.grids import Grid
from sconclab.semiconcave import make_function
from sconclab.tonelli import make_system


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--phi", default="min-parabolas")
    ap.add_argument("--h", type=float, default=0.01)
    ap.add_argument("--t-max", type=float, default=0.8)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--out", default="runs/critical_time_scan.csv")
    args = ap.parse_args()
    phi = make_function(args.phi, d=1)
    system = make_system("free", d=1)
    xg = Grid.uniform([-1.5], [1.5], args.h)
    yg = Grid.uniform(phi.domain.lower, phi.domain.upper, args.h)
    rows = []
    for t in np.arange(args.dt, args.t_max + 1e-9, args.dt):
        r = regularity_probe(phi, system, float(t), xg, yg)
        c = r["certificate"]
        rows.append([float(t), c["semiconcave"], c["semiconvex"], int(r["fail"])])
        print(f"t={t:.2f}  semiconcave={c['semiconcave']:.4g}  semiconvex={c['semiconvex']:.4g}  fail={r['fail']}")
    io.write_csv(args.out, ["t", "semiconcave", "semiconvex", "fail"], rows)


if __name__ == "__main__":
    main()
