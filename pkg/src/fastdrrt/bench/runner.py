"""Repeated seeded planner runs over one scenario segment.

Two clocks are supported.  ``wall`` measures time to first solution in
milliseconds and reads the best cost at a wall-clock budget; ``iter`` uses the
iteration counter for both, which makes the emitted files reproducible byte
for byte.  Runs are independent, so they can be spread over a process pool
(``FASTDRRT_WORKERS``); records are sorted by (mode, seed) before returning.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..oracle import composite_edge_exact_valid
from ..roadmap import RoadmapConstructionError
from ..planner import (AllOf, FirstSolution, MaxIterations, Mode, PlannerConfig, PlanResult, ProblemSpec,
                       TimeLimit, plan, validate_path)
from .pipeline import Prepared, prepare
from .scenario import PerturbationFailed, perturb_targets
from .seeds import derive_seed

WORKERS_ENV = "FASTDRRT_WORKERS"
CLOCKS = ("wall", "iter")


@dataclass
class RunRecord:
    scenario: str
    segment: int
    mode: str
    seed: int
    clock: str
    solved: bool
    time_to_first: Optional[float] = None    # ms (wall clock) or iterations (logical clock)
    iterations_to_first: Optional[int] = None
    cost_first: Optional[float] = None
    cost_at_budget: Optional[float] = None
    iterations: int = 0
    checked: str = ""                        # "", "ok" or a failure note from path revalidation
    path: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.solved:
            self.time_to_first = self.iterations_to_first = self.cost_first = self.cost_at_budget = None

    @property
    def time_to_first_ns(self) -> Optional[int]:
        if self.clock != "wall" or self.time_to_first is None:
            return None
        return int(round(self.time_to_first * 1e6))


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def run_config(mode, seed: int, budget, clock: str, max_iterations: int, expansion_rule="random_neighbor",
               freeze_any_goal: bool = False) -> PlannerConfig:
    """Run until a first solution exists and the budget is spent, or the iteration cap hits."""
    if clock not in CLOCKS:
        raise ValueError(f"clock must be one of {CLOCKS}")
    cap = MaxIterations(max_iterations)
    if budget is None:
        ptc = (FirstSolution(), cap)
    elif clock == "wall":
        ptc = (AllOf((FirstSolution(), TimeLimit(budget))), cap)
    else:
        ptc = (AllOf((FirstSolution(), MaxIterations(int(budget)))), cap)
    return PlannerConfig(ptc=ptc, mode=mode, seed=seed, expansion_rule=expansion_rule,
                         freeze_any_goal=freeze_any_goal)


def revalidate(prepared: Prepared, problem: ProblemSpec, result: PlanResult) -> list:
    """Voxel and exact audit of a returned path; returns the list of problems found."""
    issues = validate_path(prepared.graph, problem, result.best_path, result.best_cost)
    steps = [a.delta / 2 for a in prepared.annotations]
    if any(not math.isfinite(s) or s <= 0 for s in steps):
        return issues + ["annotation carries no sampling step"]
    for k, (v, w) in enumerate(zip(result.best_path[:-1], result.best_path[1:])):
        if not composite_edge_exact_valid(prepared.graph, v, w, steps):
            issues.append(f"step {k}: exact sweep overlap")
    return issues


def _record(prepared, segment, mode, seed, clock, budget, result: PlanResult, check: bool, problem) -> RunRecord:
    st = result.stats
    if not result.solved:
        return RunRecord(prepared.scenario.id, segment, Mode(mode).value, seed, clock, False, iterations=st.iterations)
    if clock == "wall":
        ttf = st.time_to_first_ns / 1e6
        at_budget = st.cost_at(elapsed_ns=int(budget * 1e9)) if budget is not None else result.best_cost
    else:
        ttf = float(st.iterations_to_first)
        at_budget = st.cost_at(iteration=int(budget)) if budget is not None else result.best_cost
    checked = ""
    if check:
        issues = revalidate(prepared, problem, result)
        checked = "ok" if not issues else "; ".join(issues)
    return RunRecord(prepared.scenario.id, segment, Mode(mode).value, seed, clock, True, ttf,
                     st.iterations_to_first, st.cost_first, at_budget, st.iterations, checked,
                     [tuple(int(x) for x in v) for v in result.best_path])


# per-process state for pool workers
_STATE: dict = {}


def _init_worker(prepared):
    _STATE["prepared"] = prepared


def _job(args):
    segment, mode, seed, budget, clock, max_iterations, rule, check, sigma = args
    prepared = _STATE["prepared"]
    if sigma:
        rng = np.random.default_rng(derive_seed(seed, 1))
        try:
            prepared = prepare(perturb_targets(prepared.scenario, sigma, rng))
        except (PerturbationFailed, RoadmapConstructionError) as exc:
            return RunRecord(prepared.scenario.id, segment, Mode(mode).value, seed, clock, False,
                             checked=f"precompute failed: {exc}")
    problem = prepared.problem(segment)
    cfg = run_config(mode, seed, budget, clock, max_iterations, rule)
    result = plan(prepared.graph, problem, cfg)
    return _record(prepared, segment, mode, seed, clock, budget, result, check, problem)


def run_segment_experiment(prepared: Prepared, segment: int, modes=("fast", "drrt"), n_runs: int = 100,
                           budget=None, master_seed: int = 0, clock: str = "wall", max_iterations: int = 100_000,
                           workers: Optional[int] = None, check_every: int = 10, perturb_sigma: float = 0.0,
                           expansion_rule: str = "random_neighbor") -> list:
    """Run every mode for seeds derived from ``master_seed`` (run k uses ``derive_seed(master, k)``).

    ``budget`` is seconds (wall clock) or iterations (logical clock).  Every
    ``check_every``-th solved run has its path re-validated (0 disables).
    With ``perturb_sigma`` > 0 each run perturbs the targets and rebuilds the
    roadmaps and volumes first; paired modes see the same perturbation.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if clock not in CLOCKS:
        raise ValueError(f"clock must be one of {CLOCKS}")
    if not 0 <= segment < len(prepared.scenario.segments):
        raise IndexError(f"scenario {prepared.scenario.id} has no segment {segment}")
    jobs = []
    for mode in modes:
        for k in range(1, n_runs + 1):
            check = bool(check_every) and k % check_every == 0
            jobs.append((segment, Mode(mode), derive_seed(master_seed, k), budget, clock, max_iterations,
                         expansion_rule, check, perturb_sigma))
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        _init_worker(prepared)
        records = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(prepared,)) as pool:
            records = list(pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    records.sort(key=lambda r: (r.mode, r.seed))
    return records


__all__ = ["WORKERS_ENV", "CLOCKS", "RunRecord", "worker_count", "run_config", "revalidate",
           "run_segment_experiment"]
