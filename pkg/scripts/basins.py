"""Certified basins for the builtin examples.

Battle of Sexes and Prisoner's Dilemma use the discrete one-step test,
Tullock and the spiral game the continuous Lie-derivative test.
"""

import argparse
import json
import math
import warnings
from pathlib import Path

import numpy as np

from gdlab.catalog import load_builtin
from gdlab.equilibrium import enumerate_pure_nash
from gdlab.stability import (
    QuadraticLyapunov,
    certify_basin,
    lyapunov_scan_continuous,
    lyapunov_scan_discrete,
    vs_scan,
)


def discrete_case(name, eta, resolution):
    g = load_builtin(name)
    rows = []
    for eq in enumerate_pure_nash(g):
        if not eq.strict:
            continue
        V = QuadraticLyapunov(eq.point)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            scan = lyapunov_scan_discrete(g, V, eta, resolution=resolution)
        c = certify_basin(scan, V)
        rows.append({"game": name, "equilibrium": [int(a) + 1 for a in eq.profile], "c": c,
                     "dominance_holds": scan.meta["dominance_holds"],
                     "Uc_within_exact_V": scan.meta.get("Uc_within_exact_V")})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eta", type=float, default=0.05)
    ap.add_argument("--resolution", type=int, default=201)
    ap.add_argument("--spacing", type=float, default=1e-3, help="grid spacing for the continuous games")
    ap.add_argument("--out", type=Path, default=Path("results/basins.json"))
    args = ap.parse_args()
    rows = discrete_case("battle_of_sexes", args.eta, args.resolution)
    rows += discrete_case("prisoners_dilemma", args.eta, args.resolution)

    tullock = load_builtin("tullock")
    x_star = np.array([0.5, 0.5])
    V = QuadraticLyapunov(x_star)
    c = certify_basin(lyapunov_scan_continuous(tullock, V, resolution=args.spacing), V)
    rows.append({"game": "tullock", "c": c, "radius": math.sqrt(c) if c else None,
                 "vs_radius": vs_scan(tullock, x_star, resolution=args.spacing).vs_radius})

    spiral = load_builtin("spiral")
    V = QuadraticLyapunov([0, 0], np.diag([1.0, 2.0]))
    scan = lyapunov_scan_continuous(spiral, V, resolution=10 * args.spacing)
    rows.append({"game": "spiral", "c_strict": certify_basin(scan, V),
                 "c_lasalle": certify_basin(scan, V, game=spiral, lasalle=True)})

    for r in rows:
        print(json.dumps(r))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(rows, indent=2) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
