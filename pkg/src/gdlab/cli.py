"""Command-line entry point: ``gdlab {analyze,simulate,scan,basin,regret}``.

Exit codes: 0 success, 1 input error, 2 numerical failure. Every run that
gets as far as knowing its output directory writes ``manifest.json`` there.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from gdlab import __version__
from gdlab.dynamics import SimulationConfig, fmt, integrate_gpds, integrate_lpds, simulate_discrete
from gdlab.equilibrium import (
    EquilibriumCandidate,
    enumerate_pure_nash,
    fixed_point_solve,
    interior_root_solve,
    monotonicity_report,
    vi_gap,
)
from gdlab.games import ContinuousGame, DimensionError, DomainError, FiniteGame, NumericalError, ParameterError
from gdlab.learning import Exp3Config, external_regret, regret_curve, simulate_selfplay
from gdlab.spec_io import SpecError, parse_number, resolve_game
from gdlab.stability import (
    QuadraticLyapunov,
    certify_basin,
    linear_stability,
    lyapunov_scan_continuous,
    lyapunov_scan_discrete,
    pure_deviation_vs_check,
    strong_vs_alpha,
    vs_scan,
)

INPUT_ERRORS = (SpecError, ParameterError, DimensionError, DomainError, FileNotFoundError)
PERTURBATION_SCALE = 1e-2
EQ_TOL = 1e-8
DEFAULTS = {"eta": 0.05, "T": 1000, "seed": 0, "resolution": 201, "h": 1e-3, "gamma": None,
            "mode": None, "x0": "uniform", "eq": None, "Q": None, "lasalle": False}


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, *flags: str) -> None:
    p.add_argument("--game", required=True, help="spec file or builtin:name[:k=v,...]")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    if "eta" in flags:
        p.add_argument("--eta", type=parse_number, default=None, help="step size")
    if "T" in flags:
        p.add_argument("--T", type=parse_number, default=None, help="horizon (rounds, steps or final time)")
    if "resolution" in flags:
        p.add_argument("--resolution", type=str, default=None,
                       help="grid points per free dimension (integer) or spacing (decimal)")
    if "eq" in flags:
        p.add_argument("--eq", default=None, help="pure:k, mixed:k or point:v1,v2,...")
        p.add_argument("--Q", default=None, help="diag:q1,q2,... for the Lyapunov weight")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gdlab", description="Gradient dynamics in games.")
    parser.add_argument("--version", action="version", version=f"gdlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("analyze", help="equilibria, monotonicity and stability report"), "resolution")
    p = sub.add_parser("simulate", help="projected gradient trajectories")
    _common(p, "eta", "T")
    p.add_argument("--x0", default=None, help="uniform | uniform-perturbed | vertex:i,j | csv:path")
    p.add_argument("--mode", choices=["discrete", "gpds", "lpds"], default=None)
    p.add_argument("--h", type=parse_number, default=None, help="integrator step (continuous modes)")
    p = sub.add_parser("scan", help="variational-stability or Lyapunov grid scan")
    _common(p, "eta", "resolution", "eq")
    p.add_argument("--mode", choices=["vs", "discrete", "continuous"], default=None)
    p = sub.add_parser("basin", help="certified sublevel set")
    _common(p, "eta", "resolution", "eq")
    p.add_argument("--mode", choices=["discrete", "continuous"], default=None)
    p.add_argument("--lasalle", action="store_true", default=None,
                   help="accept zero Lie-derivative points the flow leaves immediately")
    p = sub.add_parser("regret", help="Exp3 self-play and regret curves")
    _common(p, "T")
    p.add_argument("--gamma", type=parse_number, default=None, help="exploration rate")
    return parser


# ------------------------------------------------------------------ helpers


def _settings(args, config: dict) -> dict:
    """Flags override the spec file's config section, which overrides defaults."""
    unknown = set(config) - set(DEFAULTS)
    if unknown:
        raise InputError(f"unknown config keys in spec: {sorted(unknown)}")
    out = dict(DEFAULTS)
    out.update(config)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


def _resolution(value):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    text = str(value).strip()
    try:
        return int(text)
    except ValueError:
        return parse_number(text)


def _json_dump(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v)}")


def _x0(game, spec: str, seed: int) -> np.ndarray:
    fs = game.feasible_set()
    if spec == "uniform":
        return fs.center()
    if spec == "uniform-perturbed":
        rng = np.random.default_rng(seed)
        return fs.project(fs.center() + rng.normal(0.0, PERTURBATION_SCALE, game.dim))
    if spec.startswith("vertex:"):
        if not isinstance(game, FiniteGame):
            raise InputError("vertex starts need a finite game")
        try:
            actions = [int(a) - 1 for a in spec[len("vertex:"):].split(",")]
        except ValueError:
            raise InputError(f"bad vertex {spec!r}") from None
        if len(actions) != game.n_players or any(not 0 <= a < d for a, d in zip(actions, game.action_counts)):
            raise InputError(f"vertex needs one 1-based action per player, got {spec!r}")
        return game.pure_point(actions)
    if spec.startswith("csv:"):
        path = Path(spec[len("csv:"):])
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        numeric = []
        for r in rows:
            try:
                numeric.append([float(v) for v in r])
            except ValueError:
                continue
        if not numeric:
            raise InputError(f"{path}: no numeric row")
        x = np.array(numeric[0])
        if x.size != game.dim:
            raise DimensionError(f"{path}: start has {x.size} entries, game needs {game.dim}")
        return x
    raise InputError(f"unknown --x0 {spec!r}")


def _equilibria(game) -> tuple[list[EquilibriumCandidate], list[EquilibriumCandidate]]:
    """Pure equilibria (lexicographic) and interior ones, as listed by ``analyze``."""
    if isinstance(game, ContinuousGame):
        cand = fixed_point_solve(game, game.feasible_set().center())
        ok = cand.converged and cand.vi_gap <= EQ_TOL
        return [], [cand] if ok else []
    pure = enumerate_pure_nash(game)
    mixed = []
    try:
        x = interior_root_solve(game, game.feasible_set().center())
        fs = game.feasible_set()
        if np.all(fs.contains(x, tol=1e-12)) and fs.is_interior(x, tol=1e-9) and vi_gap(game, x) <= EQ_TOL:
            mixed.append(EquilibriumCandidate(point=x, kind="mixed", strict=False, vi_gap=vi_gap(game, x)))
    except NumericalError:
        pass
    return pure, mixed


def _select_eq(game, ref: str | None) -> np.ndarray:
    if ref is not None and ref.startswith("point:"):
        return np.array([parse_number(v) for v in ref[len("point:"):].split(",")])
    pure, mixed = _equilibria(game)
    if ref is None:
        allc = pure + mixed
        if not allc:
            raise InputError("no equilibrium found; pass --eq point:...")
        return allc[0].point
    kind, _, k = ref.partition(":")
    try:
        k = int(k)
    except ValueError:
        raise InputError(f"bad equilibrium reference {ref!r}") from None
    pool = {"pure": pure, "mixed": mixed, "interior": mixed}.get(kind)
    if pool is None:
        raise InputError(f"equilibrium kind must be pure, mixed or point, got {kind!r}")
    if not 1 <= k <= len(pool):
        raise InputError(f"{ref!r}: only {len(pool)} {kind} equilibria")
    return pool[k - 1].point


def _lyapunov(center: np.ndarray, q: str | None) -> QuadraticLyapunov:
    if q is None:
        return QuadraticLyapunov(center)
    if not q.startswith("diag:"):
        raise InputError("--Q must look like diag:q1,q2,...")
    d = np.array([parse_number(v) for v in q[len("diag:"):].split(",")])
    if d.size != center.size:
        raise InputError(f"--Q needs {center.size} entries")
    return QuadraticLyapunov(center, np.diag(d))


# ----------------------------------------------------------------- commands


def cmd_analyze(game, s, out: Path) -> list[str]:
    pure, mixed = _equilibria(game)
    res = _resolution(s["resolution"])
    if isinstance(game, FiniteGame) and sum(d - 1 for d in game.action_counts) > 2:
        res = min(res, 21) if isinstance(res, int) else res
    entries = []
    for idx, c in enumerate(pure, 1):
        e = {"ref": f"pure:{idx}", **c.to_dict()}
        ok, witness = pure_deviation_vs_check(game, c.profile)
        e["global_vs_pure_deviation"] = {"holds": ok, "witness": list(witness) if witness else None}
        e["linear_stability"] = _quiet_linear(game, c.point)
        entries.append(e)
    for idx, c in enumerate(mixed, 1):
        e = {"ref": f"mixed:{idx}", **c.to_dict()}
        e["linear_stability"] = _quiet_linear(game, c.point)
        scan = vs_scan(game, c.point, resolution=res)
        e["vs_radius"] = None if not np.isfinite(scan.vs_radius) else scan.vs_radius
        e["strong_vs_alpha"] = strong_vs_alpha(game, c.point, resolution=res)
        entries.append(e)
    report = {
        "game": getattr(game, "name", "game"),
        "equilibria": entries,
        "monotonicity": monotonicity_report(game, seed=s["seed"]).to_dict(),
    }
    _json_dump(report, out / "report.json")
    return ["report.json"]


def _quiet_linear(game, x):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return linear_stability(game, x).to_dict()


def cmd_simulate(game, s, out: Path) -> list[str]:
    mode = s["mode"] or "discrete"
    x0 = _x0(game, s["x0"], s["seed"])
    cfg = SimulationConfig(step_size=float(s["eta"]), horizon=float(s["T"]),
                           integrator_step=float(s["h"]), seed=int(s["seed"]))
    run = {"discrete": simulate_discrete, "gpds": integrate_gpds, "lpds": integrate_lpds}[mode]
    rec = run(game, x0, cfg)
    rec.to_csv(out / "trajectory.csv")
    summary = {
        "mode": mode, "classification": rec.classification, "n_states": len(rec),
        "x0": x0, "final": rec.final,
        "limit_point": rec.limit_point, "final_displacement": float(rec.step_displacements[-1]),
    }
    _json_dump(summary, out / "summary.json")
    return ["trajectory.csv", "summary.json"]


def _scan_for(game, s, mode):
    center = _select_eq(game, s["eq"])
    V = _lyapunov(center, s["Q"])
    res = _resolution(s["resolution"])
    if mode == "vs":
        return vs_scan(game, center, resolution=res), V
    if mode == "discrete":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return lyapunov_scan_discrete(game, V, float(s["eta"]), resolution=res), V
    return lyapunov_scan_continuous(game, V, resolution=res), V


def cmd_scan(game, s, out: Path) -> list[str]:
    mode = s["mode"] or ("discrete" if isinstance(game, FiniteGame) else "vs")
    scan, _ = _scan_for(game, s, mode)
    scan.to_csv(out / "scan.csv", out / "scan.json")
    return ["scan.csv", "scan.json"]


def cmd_basin(game, s, out: Path) -> list[str]:
    mode = s["mode"] or ("discrete" if isinstance(game, FiniteGame) else "continuous")
    scan, V = _scan_for(game, s, mode)
    c = certify_basin(scan, V, game=game, lasalle=bool(s["lasalle"]))
    scan.to_csv(out / "scan.csv", out / "scan.json")
    report = {"mode": mode, "certified_c": c, "center": V.center, "Q": V.Q,
              "resolution": scan.meta["resolution"], "eta": scan.meta.get("eta"),
              "checks": {k: v for k, v in scan.meta.items() if k not in ("Q", "resolution", "eta")}}
    _json_dump(report, out / "basin.json")
    return ["basin.json", "scan.csv", "scan.json"]


def cmd_regret(game, s, out: Path) -> list[str]:
    if not isinstance(game, FiniteGame):
        raise InputError("regret needs a finite game")
    T = int(s["T"])
    hist = simulate_selfplay(game, Exp3Config(gamma=s["gamma"]), T, int(s["seed"]))
    hist.to_csv(out / "history.csv")
    hist.strategies_to_csv(out / "strategies.csv")
    curves = [regret_curve(hist, game, i) for i in range(game.n_players)]
    with open(out / "regret.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["t"] + [f"R_{i + 1}" for i in range(game.n_players)]) + "\n")
        for t in range(T):
            fh.write(",".join([str(t + 1)] + [fmt(c[t]) for c in curves]) + "\n")
    summary = {
        "T": T, "regret": [external_regret(hist, game, i) for i in range(game.n_players)],
        "average_strategy": [hist.average_strategy(i) for i in range(game.n_players)],
        **{k: v for k, v in hist.meta.items() if k != "T"},
    }
    summary["regret_per_round"] = [r / T for r in summary["regret"]]
    _json_dump(summary, out / "regret.json")
    return ["history.csv", "strategies.csv", "regret.csv", "regret.json"]


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "scan": cmd_scan,
            "basin": cmd_basin, "regret": cmd_regret}


def run_command(argv: list[str] | None = None) -> int:
    start = time.perf_counter()
    manifest = {"tool": "gdlab", "version": __version__, "argv": list(argv or [])}
    out = None
    code = 0
    try:
        args = build_parser().parse_args(argv)
        out = Path(args.out)
        manifest["command"] = args.command
        game, descriptor, config = resolve_game(args.game)
        s = _settings(args, config)
        manifest.update({"game": descriptor, "config": s, "seed": s["seed"]})
        out.mkdir(parents=True, exist_ok=True)
        manifest["outputs"] = COMMANDS[args.command](game, s, out)
        manifest["status"] = "ok"
    except (InputError, *INPUT_ERRORS) as exc:
        code = 1
        manifest.update(status="input_error", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        code = 2
        manifest.update(status="numerical_failure", error=str(exc))
        print(f"numerical failure: {exc}", file=sys.stderr)
    manifest.setdefault("outputs", [])
    manifest["duration_seconds"] = round(time.perf_counter() - start, 6)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            _json_dump(manifest, out / "manifest.json")
        except OSError as exc:
            print(f"could not write manifest: {exc}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
