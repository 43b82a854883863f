"""Scenario files: robots, obstacles, per-robot targets, planning segments.

Format (JSON, ``version`` 1)::

    {
      "version": 1,
      "id": "deadlock_corridor",
      "robots": [{"base_position": [x, y], "link_lengths": [...], "link_radius": r,
                  "joint_limits": [[lo, hi], ...], "targets": [[q...], ...]}, ...],
      "obstacles": [{"type": "disc", "center": [x, y], "radius": r},
                    {"type": "rect", "min_corner": [x, y], "max_corner": [x, y]}],
      "segments": [{"start": [t0, t1, ...], "goal": [t, null, ...]}],
      "grid": {"d_voxel": 0.05, "lower": null, "upper": null, "delta_fraction": 0.5},
      "roadmap_params": {...},
      "planner_defaults": {"max_iterations": 100000, ...},
      "seed": 0
    }

Segment entries are target indices per robot; a ``null`` goal marks an
any-goal robot for that segment.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..geom import GeometryError, RobotModel, config_collides, obstacle_from_dict
from ..roadmap import RoadmapParams
from ..sweptvol import reachable_bounding_box

SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    """Schema or validity problem in a scenario file; the message names the field."""


class PerturbationFailed(RuntimeError):
    pass


@dataclass
class GridSpec:
    d_voxel: float = 0.05
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    delta_fraction: float = 0.5   # workspace displacement per edge sample, in voxels

    def to_dict(self) -> dict:
        return {
            "d_voxel": self.d_voxel,
            "lower": list(self.lower) if self.lower is not None else None,
            "upper": list(self.upper) if self.upper is not None else None,
            "delta_fraction": self.delta_fraction,
        }


@dataclass
class PlannerDefaults:
    max_iterations: int = 100_000
    time_limit: Optional[float] = None
    stop_at_first_solution: bool = False
    cost_convergence: Optional[tuple] = None
    expansion_rule: str = "random_neighbor"

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        if d["cost_convergence"] is not None:
            d["cost_convergence"] = list(d["cost_convergence"])
        return d


@dataclass
class Segment:
    start: tuple
    goal: tuple  # target index or None (any-goal)

    def to_dict(self) -> dict:
        return {"start": list(self.start), "goal": list(self.goal)}


@dataclass
class Scenario:
    id: str
    robots: list
    obstacles: list
    targets: list             # targets[i][k] -> joint vector
    segments: list
    grid: GridSpec = field(default_factory=GridSpec)
    roadmap_params: RoadmapParams = field(default_factory=RoadmapParams)
    planner_defaults: PlannerDefaults = field(default_factory=PlannerDefaults)
    seed: int = 0
    description: str = ""

    @property
    def n_robots(self) -> int:
        return len(self.robots)

    def to_dict(self) -> dict:
        robots = []
        for r, ts in zip(self.robots, self.targets):
            d = r.to_dict()
            d["targets"] = [[float(x) for x in t] for t in ts]
            robots.append(d)
        return {
            "version": SCENARIO_VERSION,
            "id": self.id,
            "description": self.description,
            "robots": robots,
            "obstacles": [o.to_dict() for o in self.obstacles],
            "segments": [s.to_dict() for s in self.segments],
            "grid": self.grid.to_dict(),
            "roadmap_params": self.roadmap_params.to_dict(),
            "planner_defaults": self.planner_defaults.to_dict(),
            "seed": self.seed,
        }

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ScenarioError(f"{where}: missing field '{key}'")
    return d[key]


def scenario_from_dict(d: dict) -> Scenario:
    if d.get("version") != SCENARIO_VERSION:
        raise ScenarioError(f"version: expected {SCENARIO_VERSION}, got {d.get('version')!r}")
    sid = str(_require(d, "id", "scenario"))
    robots, targets = [], []
    for i, rd in enumerate(_require(d, "robots", "scenario")):
        where = f"robots[{i}]"
        try:
            robots.append(RobotModel.from_dict(rd))
        except (KeyError, GeometryError, ValueError, TypeError) as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
        ts = _require(rd, "targets", where)
        if not ts:
            raise ScenarioError(f"{where}.targets: at least one target required")
        arr = []
        for k, t in enumerate(ts):
            t = np.asarray(t, dtype=float)
            if t.shape != (robots[-1].dof,):
                raise ScenarioError(f"{where}.targets[{k}]: expected {robots[-1].dof} joint angles")
            arr.append(t)
        targets.append(arr)
    obstacles = []
    for k, od in enumerate(d.get("obstacles", [])):
        try:
            obstacles.append(obstacle_from_dict(od))
        except (KeyError, GeometryError, ValueError, TypeError) as exc:
            raise ScenarioError(f"obstacles[{k}]: {exc}") from exc
    segments = []
    for k, sd in enumerate(_require(d, "segments", "scenario")):
        start = tuple(int(x) for x in _require(sd, "start", f"segments[{k}]"))
        goal = tuple(None if x is None else int(x) for x in _require(sd, "goal", f"segments[{k}]"))
        segments.append(Segment(start, goal))
    gd = d.get("grid", {})
    grid = GridSpec(
        d_voxel=float(gd.get("d_voxel", 0.05)),
        lower=tuple(gd["lower"]) if gd.get("lower") is not None else None,
        upper=tuple(gd["upper"]) if gd.get("upper") is not None else None,
        delta_fraction=float(gd.get("delta_fraction", 0.5)),
    )
    try:
        params = RoadmapParams.from_dict(d.get("roadmap_params"))
        pd = dict(d.get("planner_defaults") or {})
        if pd.get("cost_convergence") is not None:
            pd["cost_convergence"] = tuple(pd["cost_convergence"])
        defaults = PlannerDefaults(**pd)
    except TypeError as exc:
        raise ScenarioError(f"roadmap_params/planner_defaults: {exc}") from exc
    sc = Scenario(sid, robots, obstacles, targets, segments, grid, params, defaults,
                  int(d.get("seed", 0)), str(d.get("description", "")))
    validate_scenario(sc)
    return sc


def validate_scenario(sc: Scenario):
    if sc.n_robots < 2:
        raise ScenarioError("robots: at least two robots required")
    for i, (robot, ts) in enumerate(zip(sc.robots, sc.targets)):
        for k, t in enumerate(ts):
            if not robot.within_limits(t):
                raise ScenarioError(f"robots[{i}].targets[{k}]: outside joint limits")
            if config_collides(robot, t, sc.obstacles):
                raise ScenarioError(f"robots[{i}].targets[{k}]: target collides with the environment")
    if not sc.grid.d_voxel > 0:
        raise ScenarioError("grid.d_voxel: must be positive")
    if sc.grid.lower is not None and sc.grid.upper is not None:
        lo, hi = np.asarray(sc.grid.lower), np.asarray(sc.grid.upper)
        for i, robot in enumerate(sc.robots):
            blo, bhi = reachable_bounding_box(robot)
            if np.any(blo < lo) or np.any(bhi > hi):
                raise ScenarioError(f"grid: explicit bounds do not cover robots[{i}] reachable box")
    for k, seg in enumerate(sc.segments):
        if len(seg.start) != sc.n_robots or len(seg.goal) != sc.n_robots:
            raise ScenarioError(f"segments[{k}]: one entry per robot required")
        for i, (s, g) in enumerate(zip(seg.start, seg.goal)):
            n = len(sc.targets[i])
            if not 0 <= s < n or (g is not None and not 0 <= g < n):
                raise ScenarioError(f"segments[{k}]: robot {i} refers to a missing target")
        if all(g is None for g in seg.goal):
            raise ScenarioError(f"segments[{k}].goal: at least one robot needs a goal")


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(data)


def save_scenario(sc: Scenario, path):
    Path(path).write_text(json.dumps(sc.to_dict(), indent=1))


def perturb_targets(sc: Scenario, sigma: float, rng, max_tries: int = 100) -> Scenario:
    """Gaussian noise on every target angle, clamped to limits and re-drawn while colliding."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    out = copy.deepcopy(sc)
    if sigma == 0:
        return out
    for i, robot in enumerate(out.robots):
        lo, hi = robot.joint_limits[:, 0], robot.joint_limits[:, 1]
        for k, t in enumerate(sc.targets[i]):
            for _ in range(max_tries):
                q = np.clip(t + rng.normal(0.0, sigma, size=t.shape), lo, hi)
                if not config_collides(robot, q, out.obstacles):
                    out.targets[i][k] = q
                    break
            else:
                raise PerturbationFailed(f"robot {i} target {k}: no collision-free perturbation in {max_tries} tries")
    return out


__all__ = [
    "SCENARIO_VERSION", "ScenarioError", "PerturbationFailed", "GridSpec", "PlannerDefaults", "Segment",
    "Scenario", "scenario_from_dict", "validate_scenario", "load_scenario", "save_scenario", "perturb_targets",
]
