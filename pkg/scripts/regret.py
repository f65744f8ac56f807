"""Exp3 self-play: equilibrium selection in Prisoner's Dilemma and
no-regret behaviour in Matching Pennies."""

import argparse
import csv
from pathlib import Path

from gdlab.catalog import load_builtin
from gdlab.learning import external_regret, simulate_selfplay


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T-pd", type=int, default=50_000)
    ap.add_argument("--T-mp", type=int, default=100_000)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", type=Path, default=Path("results/regret.csv"))
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["game", "seed", "T", "R1_over_T", "R2_over_T", "avg_p1_action1", "avg_p2_action1",
                    "last_decile_freq_dd"])
        for name, T in (("prisoners_dilemma", args.T_pd), ("matching_pennies", args.T_mp)):
            g = load_builtin(name)
            for seed in range(args.seeds):
                h = simulate_selfplay(g, None, T, seed)
                r = [external_regret(h, g, i) / T for i in range(2)]
                avg = [h.average_strategy(i)[0] for i in range(2)]
                freq = h.profile_frequency((1, 1), start=T - T // 10)
                w.writerow([name, seed, T, f"{r[0]:.6g}", f"{r[1]:.6g}", f"{avg[0]:.4f}", f"{avg[1]:.4f}",
                            f"{freq:.4f}"])
                print(f"{name:18s} seed {seed}: R/T = {r[0]:+.4f}, {r[1]:+.4f}; "
                      f"avg p(action 1) = {avg[0]:.3f}, {avg[1]:.3f}; last-decile (2,2) = {freq:.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
