"""Experiment drivers: trajectories, convergence-order studies and method comparisons.

Run configuration file format (``key = value`` per line, ``#`` comments)::

    problem    = kepler          # kepler | harmonic
    e          = 0.6             # Kepler eccentricity
    method     = scheme_a        # rk | scheme_a | scheme_b | standard | local,
                                 # or a preset such as RK4, RK4Proj13, RK2Proj123
    tableau    = rk4             # builtin name or path to a tableau file
    dgrad      = sci             # avf | ci | sci
    invariants = 1,3             # 1-based invariant numbers
    h          = 0.2
    steps      = 500
    out        = run.csv
    tol_solver = 1e-12
    check      = false

Tableau files hold s rows of the a matrix, then b, then c, then the order,
whitespace separated (fractions like 1/6 allowed).
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dgrad import DiscreteGradient
from .localcoords import local_step
from .problems import OdeProblem, SingularityError, get_problem
from .projection import ProjectionMethodConfig, projection_step
from .rk import get_tableau, rk_flow
from .solvers import SolverError

METHODS = ("rk", "scheme_a", "scheme_b", "standard", "local")
PROJECTED = ("scheme_a", "scheme_b", "standard", "local")
ROUNDOFF_FLOOR = 1e-12
CONSERVATION_TOL = 1e-10
_PRESET = re.compile(r"^RK(\d+)(?:Proj(\d+))?$", re.IGNORECASE)
_TABLEAU_BY_ORDER = {"1": "euler", "2": "rk2_midpoint_explicit", "4": "rk4_classical", "5": "rk5", "7": "rk7"}


class ConfigError(ValueError):
    pass


class RunFailed(RuntimeError):
    """A run stopped early on a solver failure or a collision."""


@dataclass(frozen=True)
class RunConfig:
    problem: str = "kepler"
    e: float = 0.6
    method: str = "scheme_a"
    tableau: str = "rk4"
    dgrad: str = "sci"
    invariants: tuple[int, ...] = (1,)
    h: float = 0.2
    steps: int = 500
    out: str | None = None
    tol_solver: float = 1e-12
    check: bool = False
    seed: int = 0

    def __post_init__(self):
        m = _PRESET.match(self.method)
        if m:
            order, subset = m.groups()
            if order not in _TABLEAU_BY_ORDER:
                raise ConfigError(f"no builtin tableau of order {order}")
            object.__setattr__(self, "tableau", _TABLEAU_BY_ORDER[order])
            object.__setattr__(self, "method", "scheme_a" if subset else "rk")
            if subset:
                object.__setattr__(self, "invariants", tuple(int(ch) for ch in subset))
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS} or a preset like RK4Proj13")
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        if self.method in PROJECTED and not self.invariants:
            raise ConfigError("projected methods need at least one invariant")
        try:
            get_tableau(self.tableau)
            DiscreteGradient(self.dgrad)
            prob = get_problem(self.problem, self.e)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        bad = [i for i in self.invariants if not 1 <= i <= len(prob.invariants)]
        if bad:
            raise ConfigError(f"invariant numbers {bad} out of range 1..{len(prob.invariants)}")

    @property
    def subset(self) -> tuple[int, ...]:
        """0-based invariant indices, ascending."""
        return tuple(sorted(i - 1 for i in self.invariants))

    def label(self) -> str:
        base = f"{self.method}/{self.tableau}"
        return base if self.method == "rk" else f"{base}/{''.join(map(str, sorted(self.invariants)))}/{self.dgrad}"


_FIELD_TYPES = {"e": float, "h": float, "tol_solver": float, "steps": int, "seed": int}


def _coerce(key: str, value):
    if key not in RunConfig.__dataclass_fields__:
        raise ConfigError(f"unknown configuration key {key!r}")
    if value is None:
        return None
    if key == "invariants":
        if isinstance(value, str):
            return tuple(int(t) for t in re.split(r"[,\s]+", value.strip()) if t)
        return tuple(int(v) for v in value)
    if key == "check":
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if key in _FIELD_TYPES:
        try:
            return _FIELD_TYPES[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return str(value)


def parse_config_text(text: str) -> dict:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = _coerce(key, value)
    return values


def make_config(file: str | Path | None = None, **overrides) -> RunConfig:
    """File values first, then non-None keyword overrides."""
    values = parse_config_text(Path(file).read_text()) if file else {}
    for k, v in overrides.items():
        if v is not None:
            values[k] = _coerce(k, v)
    return RunConfig(**values)


# --- stepping ----------------------------------------------------------------


def make_stepper(cfg: RunConfig, problem: OdeProblem):
    """Return step(y, h) -> (y_next, solver_iterations)."""
    tab = get_tableau(cfg.tableau)
    strategy = DiscreteGradient(cfg.dgrad)
    if cfg.method == "rk":
        return lambda y, h: (rk_flow(tab, problem.field, y, h), 0)
    if cfg.method == "local":
        def step(y, h):
            r = local_step(problem, tab, y, h, cfg.subset, strategy, cfg.tol_solver)
            return r.state, r.iterations
        return step
    variant = {"standard": "standard_orthogonal"}.get(cfg.method, cfg.method)
    pcfg = ProjectionMethodConfig(variant, tab, cfg.subset, strategy, cfg.tol_solver)

    def step(y, h):
        r = projection_step(pcfg, problem, y, h)
        return r.state, r.iterations
    return step


@dataclass
class Trajectory:
    config: RunConfig
    invariant_names: list[str]
    t: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    deviations: list[np.ndarray] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)
    complete: bool = True
    error: str | None = None
    wall_time: float = 0.0

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def max_deviation(self) -> np.ndarray:
        return np.max(np.abs(np.array(self.deviations)), axis=0)

    def total_iterations(self) -> int:
        return int(sum(self.iterations))

    def metadata(self) -> dict:
        return {
            "config": asdict(self.config),
            "complete": self.complete,
            "error": self.error,
            "records": len(self.t),
            "solver_iterations": self.total_iterations(),
            "wall_time_s": self.wall_time,
        }

    def to_csv(self) -> str:
        m = self.states[0].size
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "t", *[f"y{i + 1}" for i in range(m)], *[f"dev_{n}" for n in self.invariant_names], "solver_iters"])
        for n, (t, y, d, it) in enumerate(zip(self.t, self.states, self.deviations, self.iterations)):
            w.writerow([n, _fmt(t), *map(_fmt, y), *map(_fmt, d), it])
        return buf.getvalue()

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text(self.to_csv())
        Path(str(path) + ".meta.json").write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def run(cfg: RunConfig) -> Trajectory:
    """Integrate `cfg.steps` steps, recording state and invariant deviations.

    Solver failures and collisions stop the run; the trajectory is then
    marked incomplete and keeps every accepted step.
    """
    problem = get_problem(cfg.problem, cfg.e)
    subset = cfg.subset
    step = make_stepper(cfg, problem)
    y = problem.initial_state.copy()
    H0 = problem.invariant_values(y, subset)
    traj = Trajectory(cfg, [problem.invariants[i].name for i in subset])
    traj.t.append(0.0)
    traj.states.append(y)
    traj.deviations.append(np.zeros(len(subset)))
    traj.iterations.append(0)
    t0 = time.perf_counter()
    for n in range(1, cfg.steps + 1):
        try:
            y, its = step(y, cfg.h)
            if not np.all(np.isfinite(y)):
                raise FloatingPointError("state is not finite")
            dev = problem.invariant_values(y, subset) - H0
        except (SolverError, SingularityError, FloatingPointError, np.linalg.LinAlgError) as exc:
            traj.complete = False
            traj.error = f"step {n}: {exc}"
            break
        traj.t.append(n * cfg.h)
        traj.states.append(y)
        traj.deviations.append(dev)
        traj.iterations.append(its)
    traj.wall_time = time.perf_counter() - t0
    return traj


# --- order studies -------------------------------------------------------------


@dataclass
class OrderStudy:
    h: list[float]
    error: list[float]
    slope: float
    fitted: bool
    final_time: float

    def to_csv(self) -> str:
        lines = ["h,error"] + [f"{_fmt(h)},{_fmt(e)}" for h, e in zip(self.h, self.error)]
        lines.append(f"slope={_fmt(self.slope) if self.fitted else 'nan'}")
        return "\n".join(lines) + "\n"


def fit_slope(h: Sequence[float], err: Sequence[float], floor: float = ROUNDOFF_FLOOR) -> tuple[float, bool]:
    """Least-squares slope of log(err) against log(h), ignoring points at or below `floor`."""
    pts = [(math.log(a), math.log(b)) for a, b in zip(h, err) if b > floor and math.isfinite(b)]
    if len(pts) < 2:
        return math.nan, False
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0]), True


def global_error(cfg: RunConfig, h: float, final_time: float = 1.0) -> float:
    steps = round(final_time / h)
    if not math.isclose(steps * h, final_time, rel_tol=1e-12):
        raise ConfigError(f"h={h} does not divide T={final_time}")
    traj = run(replace(cfg, h=h, steps=steps, out=None))
    if not traj.complete:
        raise RunFailed(traj.error)
    problem = get_problem(cfg.problem, cfg.e)
    return float(np.linalg.norm(traj.final_state - problem.reference_solution(final_time)))


def order_study(cfg: RunConfig, h_list: Sequence[float], final_time: float = 1.0, jobs: int = 1) -> OrderStudy:
    if len(h_list) < 3:
        raise ConfigError("an order study needs at least three step sizes")
    if get_problem(cfg.problem, cfg.e).reference_solution is None:
        raise ConfigError(f"problem {cfg.problem!r} has no reference solution")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            errs = list(pool.map(global_error, [cfg] * len(h_list), h_list, [final_time] * len(h_list)))
    else:
        errs = [global_error(cfg, h, final_time) for h in h_list]
    slope, ok = fit_slope(h_list, errs)
    return OrderStudy(list(h_list), errs, slope, ok, final_time)


# --- method comparison ----------------------------------------------------------


def compare_standard(cfg_a: RunConfig, cfg_std: RunConfig) -> dict:
    """Run both configurations and report final error, drift, time and solver work."""
    if (cfg_a.problem, cfg_a.e, cfg_a.subset) != (cfg_std.problem, cfg_std.e, cfg_std.subset):
        raise ConfigError("compared runs must share problem, eccentricity and invariant subset")
    problem = get_problem(cfg_a.problem, cfg_a.e)
    rows = []
    for slot, cfg in (("discrete", cfg_a), ("standard", cfg_std)):
        traj = run(cfg)
        t_end = traj.t[-1]
        ref = problem.reference_solution(t_end) if problem.reference_solution else None
        rows.append({
            "slot": slot,
            "method": cfg.method,
            "tableau": cfg.tableau,
            "h": cfg.h,
            "steps": len(traj.t) - 1,
            "complete": traj.complete,
            "final_error": float(np.linalg.norm(traj.final_state - ref)) if ref is not None else math.nan,
            "max_dev": dict(zip(traj.invariant_names, map(float, traj.max_deviation()))),
            "wall_time_s": traj.wall_time,
            "solver_iters": traj.total_iterations(),
        })
    flags = []
    if cfg_a.method == cfg_std.method:
        flags.append(f"both slots use method {cfg_a.method!r}")
    if cfg_a.tableau != cfg_std.tableau:
        flags.append("underlying tableaus differ")
    return {"rows": rows, "flags": flags}


def comparison_csv(report: dict) -> str:
    names = list(report["rows"][0]["max_dev"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slot", "method", "tableau", "h", "steps", "complete", "final_error",
                *[f"max_dev_{n}" for n in names], "wall_time_s", "solver_iters"])
    for r in report["rows"]:
        w.writerow([r["slot"], r["method"], r["tableau"], _fmt(r["h"]), r["steps"], r["complete"],
                    _fmt(r["final_error"]), *[_fmt(r["max_dev"][n]) for n in names],
                    f"{r['wall_time_s']:.3f}", r["solver_iters"]])
    return buf.getvalue()
