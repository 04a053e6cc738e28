"""Fit the decay exponent e in |φ_β| ≈ C G_o^e for edge fields β supported near the centre.

Prints one line per (side, support radius, sample) with the fitted exponent
and the implied integrability limit 2e - 1.

    python scripts/decay_probe.py --sides 16 24 --samples 3
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass, field

import numpy as np

from potlab import mv
from potlab.space import build_grid_space


@dataclass
class DecayConfig:
    sides: list[int] = field(default_factory=lambda: [16, 24])
    radii: list[float] = field(default_factory=lambda: [1.0, 2.0])
    samples: int = 3
    seed: int = 0


def supported_field(s, o, R, rng):
    row = s.dist_rows([o])[0]
    a, b = s.edge_ends
    inside = (a >= 0) & (b >= 0)
    keep = np.zeros(s.n_edges, dtype=bool)
    keep[inside] = (row[a[inside]] <= R) & (row[b[inside]] <= R)
    return np.where(keep, rng.standard_normal(s.n_edges), 0.0)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sides", type=int, nargs="+", default=DecayConfig().sides)
    ap.add_argument("--samples", type=int, default=DecayConfig.samples)
    ap.add_argument("--seed", type=int, default=DecayConfig.seed)
    args = ap.parse_args(argv)
    cfg = DecayConfig(sides=args.sides, samples=args.samples, seed=args.seed)
    rng = np.random.default_rng(cfg.seed)
    print("side radius sample exponent p_max points")
    for side in cfg.sides:
        s = build_grid_space(3, side)
        o = s.center_vertex()
        for R in cfg.radii:
            for k in range(cfg.samples):
                p = mv.decay_estimate_probe(s, supported_field(s, o, R, rng), o, R)
                print(f"{side} {R:g} {k} {p.exponent:.4f} {p.p_max:.4f} {p.n_points}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
