"""Projected gradient play in discrete time and its continuous-time limits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gdlab.games import Game, check_point
from gdlab.projection import FeasibleSet

CONVERGED = "converged_point"
CYCLE = "suspected_cycle"
NON_CONVERGENT = "non_convergent"
HORIZON = "horizon_exhausted"
CLASSIFICATIONS = (CONVERGED, CYCLE, NON_CONVERGENT, HORIZON)


@dataclass(frozen=True)
class SimulationConfig:
    """Step size and stopping rules.

    ``horizon`` is an iteration count for discrete play and a final time for
    the continuous integrators, which advance with ``integrator_step``.
    ``seed`` only matters for callers that draw random starts.
    """

    step_size: float = 0.05
    horizon: float = 1000
    integrator_step: float = 1e-3
    stop_tolerance: float = 1e-8
    cycle_tolerance: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.integrator_step > 0:
            raise ValueError("integrator_step must be positive")
        if not self.stop_tolerance > 0 or not self.cycle_tolerance > 0:
            raise ValueError("tolerances must be positive")


@dataclass
class TrajectoryRecord:
    states: np.ndarray
    times: np.ndarray
    gradient_norms: np.ndarray
    step_displacements: np.ndarray
    classification: str = HORIZON
    limit_point: np.ndarray | None = None
    stop_tolerance: float = 1e-8
    cycle_tolerance: float = 1e-6
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def distances_to(self, point) -> np.ndarray:
        return np.linalg.norm(self.states - np.asarray(point, dtype=float), axis=1)

    def to_csv(self, path) -> None:
        D = self.states.shape[1]
        header = ["t"] + [f"x_{j}" for j in range(D)] + ["grad_norm", "displacement"]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for k in range(len(self.states)):
                t = self.times[k]
                t_str = str(int(t)) if self.meta.get("mode") == "discrete" else fmt(t)
                row = [t_str] + [fmt(v) for v in self.states[k]]
                row += [fmt(self.gradient_norms[k]), fmt(self.step_displacements[k])]
                fh.write(",".join(row) + "\n")


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def step_discrete(game: Game, x, eta: float, feasible: FeasibleSet | None = None) -> np.ndarray:
    """One projected gradient ascent step, ``proj(x + eta F(x))``."""
    feasible = feasible or game.feasible_set()
    x = np.asarray(x, dtype=float)
    return feasible.project(x + eta * game.gradient(x))


class _CycleWatch:
    """Compares new states against a strided archive of earlier ones.

    A match only counts once the path travelled since the archived state
    exceeds ten times the tolerance, so a slow drift is not mistaken for a
    revisit.
    """

    def __init__(self, horizon: int, dim: int, tol: float):
        self.stride = max(1, int(horizon) // 1000)
        self.tol = tol
        cap = int(horizon) // self.stride + 2
        self.idx = np.zeros(cap, dtype=int)
        self.archive = np.zeros((cap, dim))
        self.size = 0

    def add(self, t: int, x: np.ndarray) -> None:
        if t % self.stride == 0:
            self.idx[self.size] = t
            self.archive[self.size] = x
            self.size += 1

    def revisits(self, x: np.ndarray, t: int, path: np.ndarray) -> bool:
        """``path[k]`` is the cumulative distance travelled up to step ``k``."""
        if t < 10 or self.size == 0:
            return False
        diff = self.archive[: self.size] - x
        d2 = np.einsum("ij,ij->i", diff, diff)
        hits = self.idx[: self.size][d2 <= self.tol * self.tol]
        hits = hits[hits < t]
        return bool(hits.size) and bool(np.any(path[t] - path[hits] > 10 * self.tol))


def _run(game, x0, step, n_steps, times_per_step, cfg, feasible, mode):
    # ``step(x, g)`` receives the gradient at ``x`` so it is evaluated once per state
    x = check_point(game, x0).astype(float).copy()
    D = x.size
    states = np.empty((n_steps + 1, D))
    grad_norms = np.empty(n_steps + 1)
    disps = np.zeros(n_steps + 1)
    path = np.zeros(n_steps + 1)
    g = game.gradient(x)
    states[0] = x
    grad_norms[0] = np.linalg.norm(g)
    watch = _CycleWatch(n_steps, D, cfg.cycle_tolerance)
    watch.add(0, x)
    classification = None
    last = n_steps
    for t in range(1, n_steps + 1):
        x_new = step(x, g)
        dx = x_new - x
        d = math.sqrt(dx @ dx)
        g = game.gradient(x_new)
        states[t] = x_new
        grad_norms[t] = math.sqrt(g @ g)
        disps[t] = d
        path[t] = path[t - 1] + d
        x = x_new
        # continuous modes compare speed, which equals displacement when dt = 1
        if d < cfg.stop_tolerance * times_per_step:
            classification, last = CONVERGED, t
            break
        if watch.revisits(x, t, path):
            classification, last = CYCLE, t
            break
        watch.add(t, x)
    record = TrajectoryRecord(
        states=states[: last + 1],
        times=np.arange(last + 1) * times_per_step,
        gradient_norms=grad_norms[: last + 1],
        step_displacements=disps[: last + 1],
        stop_tolerance=cfg.stop_tolerance,
        cycle_tolerance=cfg.cycle_tolerance,
        meta={"mode": mode, "step_size": cfg.step_size, "n_steps": n_steps},
    )
    record.classification = classification or classify_limit(record)
    if record.classification == CONVERGED:
        record.limit_point = record.final.copy()
    return record


def simulate_discrete(game: Game, x0, config: SimulationConfig, feasible: FeasibleSet | None = None) -> TrajectoryRecord:
    feasible = feasible or game.feasible_set()
    eta = config.step_size
    return _run(game, x0, lambda x, g: feasible.project(x + eta * g),
                int(config.horizon), 1, config, feasible, "discrete")


def _renormalize(feasible: FeasibleSet, x: np.ndarray) -> np.ndarray:
    if feasible.kind == "box":
        return np.clip(x, feasible.lower, feasible.upper)
    x = np.clip(x, 0.0, None)
    for sl in feasible.slices:
        x[sl] /= x[sl].sum()
    return x


def integrate_gpds(game: Game, x0, config: SimulationConfig, feasible: FeasibleSet | None = None) -> TrajectoryRecord:
    """Explicit Euler on ``dx/dt = proj(x + eta F(x)) - x``."""
    feasible = feasible or game.feasible_set()
    eta, h = config.step_size, config.integrator_step

    def step(x, g):
        v = feasible.project(x + eta * g) - x
        return _renormalize(feasible, x + h * v)

    n_steps = math.ceil(config.horizon / h - 1e-9)
    return _run(game, x0, step, n_steps, h, config, feasible, "gpds")


def integrate_lpds(game: Game, x0, config: SimulationConfig, feasible: FeasibleSet | None = None) -> TrajectoryRecord:
    """Explicit Euler on ``dx/dt = proj_T(x)(F(x))`` with re-projection after each step."""
    feasible = feasible or game.feasible_set()
    h = config.integrator_step

    def step(x, g):
        v = feasible.project_tangent_cone(x, g)
        return feasible.project(x + h * v)

    n_steps = math.ceil(config.horizon / h - 1e-9)
    return _run(game, x0, step, n_steps, h, config, feasible, "lpds")


def classify_limit(record: TrajectoryRecord) -> str:
    """Classify the tail of a trajectory.

    converged_point: the last step moved less than the stop tolerance (for
    continuous modes, the last step's speed did).
    suspected_cycle: the final state revisits an archived earlier state
    within the cycle tolerance after an excursion.
    non_convergent: the final state returns closer to some state outside the
    recent window than a typical recent step, i.e. the orbit is recurrent.
    horizon_exhausted: none of the above, e.g. still drifting.
    """
    states = np.asarray(record.states)
    n = len(states)
    if n == 0:
        raise ValueError("empty trajectory")
    if n == 1:
        return HORIZON
    dt = min(1.0, float(record.times[-1] - record.times[-2]))
    if record.step_displacements[-1] < record.stop_tolerance * dt:
        return CONVERGED
    t = n - 1
    watch = _CycleWatch(t, states.shape[1], record.cycle_tolerance)
    for s in range(0, t, watch.stride):
        watch.add(s, states[s])
    path = np.concatenate([[0.0], np.cumsum(record.step_displacements[1:])])
    if watch.revisits(states[t], t, path):
        return CYCLE
    window = max(10, n // 10)
    if n - window < 1:
        return HORIZON
    older = states[: n - window]
    nearest = np.min(np.linalg.norm(older - states[-1], axis=1))
    typical = np.median(record.step_displacements[n - window:])
    if nearest < typical:
        return NON_CONVERGENT
    return HORIZON
