"""Track size-dependent constants on 3D Dirichlet boxes of increasing side.

Writes one CSV row per (side, quantity, parameter) with the measured value:
energy ratios of powers of the equilibrium potential, A1 constants of powers
of the Green function, Green two-sided constants and the multiplier ratio B/A².

    python scripts/refinement_trends.py --sides 8 12 16 --out trends.csv
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from potlab import calculus as calc, mv, potential as pot, weights as wt
from potlab.space import ball, balls_within, build_grid_space


@dataclass
class TrendConfig:
    sides: list[int] = field(default_factory=lambda: [8, 16, 24])
    ball_radius: float = 2.0
    energy_taus: list[float] = field(default_factory=lambda: [0.6, 1.0, 2.0, 4.0])
    a1_taus: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0, 3.5])
    nu_amb: float = 3.0
    out: str = "trends.csv"


def rows_for_side(cfg: TrendConfig, side: int):
    s = build_grid_space(3, side)
    o = s.center_vertex()
    eq = pot.capacity(s, ball(s, o, cfg.ball_radius).members)
    for t in cfg.energy_taus:
        yield side, "energy_ratio", t, pot.htau_energy_check(s, eq, t).ratio
    G = calc.green_columns(s, [o])[:, 0]
    fam = balls_within(s, s.inner_region(0.5), np.arange(1, side // 2 + 1, dtype=float))
    for t in cfg.a1_taus:
        yield side, "a1_green_power", t, wt.a1_constant(s, G**t, fam).constant
    g = calc.check_green_estimates(s, cfg.nu_amb)
    yield side, "green_C_over_c", cfg.nu_amb, g.ratio
    f = (s.dist_rows([o])[0] <= cfg.ball_radius).astype(float)
    yield side, "mv_B_over_A2", cfg.ball_radius, mv.mv_verify(s, mv.Potential.function(f)).ratio_reverse


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sides", type=int, nargs="+", default=TrendConfig().sides)
    ap.add_argument("--out", default=TrendConfig.out)
    args = ap.parse_args(argv)
    cfg = TrendConfig(sides=args.sides, out=args.out)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["side", "quantity", "parameter", "value"])
        for side in cfg.sides:
            t0 = time.perf_counter()
            for row in rows_for_side(cfg, side):
                w.writerow(row)
            print(f"side {side}: {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
