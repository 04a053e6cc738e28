"""Norm of the Hodge projector on h^δ-weighted edge fields over a δ grid and several box sizes.

h is the equilibrium potential of the centre ball. The grid covers the
classical range (-1, 1) and the improved range (1, 1.5]; the bound column is
((1+|δ|)/(1-|δ|))² where it is finite.

    python scripts/hodge_sweep.py --sides 8 16 --out hodge.csv
"""
from __future__ import annotations

import argparse
import csv
from dataclasses import dataclass, field

import numpy as np

from potlab import potential as pot, weights as wt
from potlab.space import ball, build_grid_space


@dataclass
class SweepConfig:
    sides: list[int] = field(default_factory=lambda: [8, 16])
    radius: float = 2.0
    deltas: list[float] = field(default_factory=lambda: [float(d) for d in np.r_[np.linspace(-0.9, 0.9, 13).round(4) + 0.0,
                                                                                1.1, 1.25, 1.4, 1.5]])
    method: str = "lanczos"
    out: str = "hodge.csv"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sides", type=int, nargs="+", default=SweepConfig().sides)
    ap.add_argument("--radius", type=float, default=SweepConfig.radius)
    ap.add_argument("--method", choices=["lanczos", "power"], default=SweepConfig.method)
    ap.add_argument("--out", default=SweepConfig.out)
    args = ap.parse_args(argv)
    cfg = SweepConfig(sides=args.sides, radius=args.radius, method=args.method, out=args.out)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["side", "delta", "norm", "bound", "norm_sq_over_bound"])
        for side in cfg.sides:
            s = build_grid_space(3, side)
            h = pot.capacity(s, ball(s, s.center_vertex(), cfg.radius).members).h
            for r in wt.weighted_hodge_sweep(s, h, cfg.deltas, method=cfg.method):
                w.writerow([side, r.delta, r.norm, r.bound, r.slack])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
