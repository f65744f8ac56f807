"""Local projected dynamics on extended Matching Pennies started on either
side of the trap threshold. Prints how the first components move."""

import argparse

import numpy as np

from gdlab.catalog import load_builtin
from gdlab.dynamics import SimulationConfig, integrate_lpds


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=float, default=1.0)
    ap.add_argument("--q", type=float, default=2.0)
    ap.add_argument("--T", type=float, default=20.0)
    args = ap.parse_args()
    g = load_builtin("extended_matching_pennies", {"r": args.r, "q": args.q})
    strict = np.array([1, 0, 0, 1, 0, 0.0])
    for a in (0.3, 0.45, 0.5 - 1e-6, 0.55, 0.6, 0.8):
        rest = (1 - a) / 2
        x0 = np.array([a, rest, rest, a, rest, rest])
        rec = integrate_lpds(g, x0, SimulationConfig(horizon=args.T))
        d0, d1 = np.linalg.norm(x0 - strict), np.linalg.norm(rec.final - strict)
        print(f"start {a:.6f}: first components -> {rec.final[0]:.4f}, {rec.final[3]:.4f}; "
              f"distance to strict equilibrium {d0:.4f} -> {d1:.4f} ({rec.classification})")


if __name__ == "__main__":
    main()
