"""Multi-seed experiment runs: learning-curve CSVs, convergence summary, DOT exports."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from afrai.automata import dumps_fra, format_label, format_reward, fra_to_dot, loads_fra
from afrai.environments import (
    CRAFT_TASKS,
    OFFICE_TASKS,
    load_grid_config,
    make_corridor,
    make_minecraft_world,
    make_office_world,
)
from afrai.oracle import episode_optimum
from afrai.orchestrator import Afrai, BootstrapError
from afrai.rl import Hyperparams

log = logging.getLogger(__name__)

# (eplength, total_steps) per task
TASK_DEFAULTS = {
    ("office", 1): (200, 1_000_000),
    ("office", 2): (800, 2_000_000),
    ("office", 3): (800, 6_000_000),
    ("craft", 1): (400, 400_000),
    ("craft", 2): (400, 250_000),
    ("corridor", 1): (8, 2_000),
}
ENVS = ("office", "craft", "corridor")
WINDOW_STEPS = 1000
TOLERANCE = 0.05


class ConfigError(ValueError):
    def __init__(self, fieldname: str, msg: str):
        super().__init__(f"{fieldname}: {msg}")
        self.field = fieldname


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "office"
    task: int = 1
    seeds: tuple = tuple(range(10))
    total_steps: int | None = None
    eplength: int | None = None
    budget_c: int = 500
    alpha: float = 0.5
    gamma: float = 0.9
    epsilon: float = 0.1
    compress_empty: bool = True
    compress_repeats: bool = True
    map: str | None = None
    out_dir: str = "runs"
    workers: int = 1

    def __post_init__(self):
        if self.env not in ENVS:
            raise ConfigError("env", f"must be one of {', '.join(ENVS)}, got {self.env!r}")
        if (self.env, self.task) not in TASK_DEFAULTS:
            tasks = sorted(t for e, t in TASK_DEFAULTS if e == self.env)
            raise ConfigError("task", f"{self.env} tasks are {tasks}, got {self.task!r}")
        eplength, total = TASK_DEFAULTS[self.env, self.task]
        if self.eplength is None:
            object.__setattr__(self, "eplength", eplength)
        if self.total_steps is None:
            object.__setattr__(self, "total_steps", total)
        object.__setattr__(self, "seeds", tuple(self.seeds))
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds", "seeds must be distinct")
        for name in ("total_steps", "eplength", "budget_c", "workers"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        try:
            Hyperparams(self.alpha, self.gamma, self.epsilon, self.eplength)
        except ValueError as exc:
            name = str(exc).split()[0]
            raise ConfigError(name, str(exc)) from None
        if self.map is not None and self.env == "corridor":
            raise ConfigError("map", "the corridor has a fixed layout")

    @property
    def hyperparams(self) -> Hyperparams:
        return Hyperparams(self.alpha, self.gamma, self.epsilon, self.eplength)


def make_env(config: ExperimentConfig):
    if config.env == "corridor":
        return make_corridor()
    override = load_grid_config(config.map) if config.map else None
    if config.env == "office":
        return make_office_world(config.task, override)
    return make_minecraft_world(config.task, override)


@dataclass
class SeedResult:
    seed: int
    steps: int
    convergence_step: int | None
    hyp_states: int
    counterexamples: int
    queries: int
    optimum: float
    error: str = ""
    files: list = field(default_factory=list)


def episode_returns(rewards, eplength: int) -> list:
    n = len(rewards) // eplength
    return [math.fsum(rewards[i * eplength:(i + 1) * eplength]) for i in range(n)]


def convergence_step(rewards, eplength: int, optimum: float,
                     window: int = WINDOW_STEPS, tol: float = TOLERANCE):
    """End step of the episode after which the trailing average never drops below
    ``(1 - tol)`` of the optimum; None if the last check fails.

    Checks happen at episode boundaries, and the trailing window covers the
    last ``ceil(window / eplength)`` whole episodes so it never cuts one in half.
    """
    returns = episode_returns(rewards, eplength)
    k = max(1, math.ceil(window / eplength))
    target = (1.0 - tol) * k * optimum
    last_fail = None
    for i in range(k - 1, len(returns)):
        if math.fsum(returns[i - k + 1:i + 1]) < target - 1e-9:
            last_fail = i
    if len(returns) < k or last_fail == len(returns) - 1:
        return None
    first_ok = k - 1 if last_fail is None else last_fail + 1
    return (first_ok + 1) * eplength


def write_rewards_csv(path: Path, metrics) -> None:
    window = deque(maxlen=10)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["step", "reward", "avg10", "phase", "hyp_states"])
        for step, r, phase, hyp_states, _ in metrics.rows():
            window.append(r)
            out.writerow([step, f"{r:g}", f"{math.fsum(window) / len(window):.6g}", phase, hyp_states])


def run_seed(config: ExperimentConfig, seed: int) -> SeedResult:
    env = make_env(config)
    optimum = episode_optimum(env, config.eplength)
    out = Path(config.out_dir)
    afrai = Afrai(env, config.hyperparams, config.budget_c, config.total_steps, seed,
                  compress_empty=config.compress_empty,
                  compress_repeats=config.compress_repeats)
    error = ""
    try:
        result = afrai.run()
        metrics, hyp = result.metrics, result.hypothesis
    except BootstrapError as exc:
        error = str(exc)
        metrics, hyp = afrai.metrics, afrai.hypothesis
    files = [out / f"rewards_seed{seed}.csv", out / f"hypothesis_seed{seed}.dot",
             out / f"hypothesis_seed{seed}.fra"]
    write_rewards_csv(files[0], metrics)
    files[1].write_text(fra_to_dot(hyp, f"hypothesis_seed{seed}"))
    files[2].write_text(dumps_fra(hyp))
    conv = convergence_step(metrics.rewards, config.eplength, optimum)
    log.info("seed %d: %d steps, convergence %s, %d-state hypothesis",
             seed, afrai.steps, conv, hyp.n_states)
    return SeedResult(seed, afrai.steps, conv, hyp.n_states, len(afrai.counterexamples),
                      afrai.queries_answered, optimum, error, [str(f) for f in files])


SUMMARY_FIELDS = ("seed", "steps", "converged", "convergence_step", "hyp_states",
                  "counterexamples", "queries", "optimum_per_episode", "error")


def write_summary(path: Path, results) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SUMMARY_FIELDS)
        for r in results:
            out.writerow([
                r.seed, r.steps, int(r.convergence_step is not None),
                "" if r.convergence_step is None else r.convergence_step,
                r.hyp_states, r.counterexamples, r.queries, f"{r.optimum:.6g}", r.error,
            ])


def run_experiment(config: ExperimentConfig) -> list:
    """Run every seed, write per-seed artifacts and ``summary.csv``; return the results."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.workers == 1 or len(config.seeds) == 1:
        results = [run_seed(config, s) for s in config.seeds]
    else:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(config.seeds))) as pool:
            results = list(pool.map(run_seed, [config] * len(config.seeds), config.seeds))
    write_summary(out / "summary.csv", results)
    return results


def config_with(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return dataclasses.replace(config, **changes)


def inspect_automaton(path) -> str:
    """Readable transition table of a serialized automaton file."""
    fra = loads_fra(Path(path).read_text())
    labels = list(fra.input_alphabet)
    header = ["state"] + [format_label(lab) for lab in labels]
    rows = []
    for w in fra.states:
        mark = "->" if w == fra.initial else ""
        cells = [f"{fra.delta[w, lab]}/{format_reward(fra.eta[w, lab])}" for lab in labels]
        rows.append([f"{mark}{w}"] + cells)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(c.rjust(wd) for c, wd in zip(r, widths)) for r in [header] + rows]
    return "\n".join(lines) + "\n"


__all__ = [
    "CRAFT_TASKS", "OFFICE_TASKS", "TASK_DEFAULTS", "ConfigError", "ExperimentConfig",
    "SeedResult", "convergence_step", "inspect_automaton", "make_env", "run_experiment",
    "run_seed", "write_rewards_csv",
]
