"""Offline precomputation (roadmaps, swept volumes) and the on-disk workspace layout.

A workspace directory holds::

    scenario.json        copy of the scenario
    roadmap_<i>.json     roadmap of robot i          (gen-roadmap)
    volumes_<i>.bin      voxel volumes of robot i    (voxelize)
"""
from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..composite import ImplicitGraph
from ..planner import ANY, ProblemSpec
from ..roadmap import Roadmap, build_roadmap
from ..sweptvol import annotate_roadmap, default_delta, grid_covering, load_volumes, read_grid_header, save_volumes
from .scenario import Scenario, load_scenario, save_scenario
from .seeds import derive_seed


class MissingArtifactError(FileNotFoundError):
    pass


@dataclass
class Prepared:
    scenario: Scenario
    roadmaps: list
    annotations: list
    graph: ImplicitGraph

    def problem(self, segment: int) -> ProblemSpec:
        return segment_problem(self.scenario, self.roadmaps, segment)


def build_roadmaps(sc: Scenario) -> list:
    return [
        build_roadmap(robot, sc.targets[i], sc.obstacles, sc.roadmap_params,
                      np.random.default_rng(derive_seed(sc.seed, i)))
        for i, robot in enumerate(sc.robots)
    ]


def scenario_grid(sc: Scenario, d_voxel=None):
    d = d_voxel if d_voxel is not None else sc.grid.d_voxel
    return grid_covering(sc.robots, d, sc.grid.lower, sc.grid.upper)


def voxelize_all(sc: Scenario, roadmaps, d_voxel=None, delta=None) -> list:
    grid = scenario_grid(sc, d_voxel)
    out = []
    for robot, rm in zip(sc.robots, roadmaps):
        dl = delta if delta is not None else default_delta(robot, grid.d_voxel, sc.grid.delta_fraction)
        out.append(annotate_roadmap(robot, rm, grid, dl))
    return out


def prepare(sc: Scenario, d_voxel=None, delta=None) -> Prepared:
    roadmaps = build_roadmaps(sc)
    anns = voxelize_all(sc, roadmaps, d_voxel, delta)
    return Prepared(sc, roadmaps, anns, ImplicitGraph(sc.robots, anns))


def segment_problem(sc: Scenario, roadmaps, segment: int) -> ProblemSpec:
    if not 0 <= segment < len(sc.segments):
        raise IndexError(f"scenario {sc.id} has no segment {segment}")
    seg = sc.segments[segment]
    start = tuple(rm.target_nodes[t] for rm, t in zip(roadmaps, seg.start))
    goals = tuple(ANY if g is None else frozenset({rm.target_nodes[g]}) for rm, g in zip(roadmaps, seg.goal))
    return ProblemSpec(start, goals)


# ---------------------------------------------------------------------------
# workspace directories


def write_roadmaps(sc: Scenario, roadmaps, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_scenario(sc, out / "scenario.json")
    for i, rm in enumerate(roadmaps):
        rm.save(out / f"roadmap_{i}.json")
    for stale in out.glob("volumes_*.bin"):
        stale.unlink()


def gen_roadmap_dir(scenario_path, out_dir) -> list:
    sc = load_scenario(scenario_path)
    roadmaps = build_roadmaps(sc)
    write_roadmaps(sc, roadmaps, out_dir)
    return roadmaps


def load_roadmaps(ws) -> tuple:
    ws = Path(ws)
    if not (ws / "scenario.json").exists():
        raise MissingArtifactError(f"{ws}: no scenario.json; run `fastdrrt gen-roadmap <scenario> -o {ws}` first")
    sc = load_scenario(ws / "scenario.json")
    roadmaps = []
    for i in range(sc.n_robots):
        p = ws / f"roadmap_{i}.json"
        if not p.exists():
            raise MissingArtifactError(f"{p} missing; run `fastdrrt gen-roadmap` first")
        roadmaps.append(Roadmap.load(p))
    return sc, roadmaps


def voxelize_dir(ws, d_voxel=None, delta=None) -> list:
    sc, roadmaps = load_roadmaps(ws)
    anns = voxelize_all(sc, roadmaps, d_voxel, delta)
    for i, ann in enumerate(anns):
        save_volumes(Path(ws) / f"volumes_{i}.bin", ann)
    return anns


def load_workspace(ws) -> Prepared:
    ws = Path(ws)
    sc, roadmaps = load_roadmaps(ws)
    paths = [ws / f"volumes_{i}.bin" for i in range(sc.n_robots)]
    for p in paths:
        if not p.exists():
            raise MissingArtifactError(f"{p} missing; run `fastdrrt voxelize {ws}` first")
    grid = read_grid_header(paths[0])
    anns = [load_volumes(p, rm, grid) for p, rm in zip(paths, roadmaps)]
    return Prepared(sc, roadmaps, anns, ImplicitGraph(sc.robots, anns))


def clear_workspace(ws):
    shutil.rmtree(ws, ignore_errors=True)


__all__ = [
    "MissingArtifactError", "Prepared", "build_roadmaps", "scenario_grid", "voxelize_all", "prepare",
    "segment_problem", "write_roadmaps", "gen_roadmap_dir", "load_roadmaps", "voxelize_dir", "load_workspace",
]
