"""Builders for the bundled desk-scale scenarios and for random oracle-sized instances.

The JSON files under ``fastdrrt/scenarios`` are generated from these
functions (``python -m fastdrrt.bench.suite``); tests load the files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from importlib import resources
from pathlib import Path

import numpy as np

from ..composite import ImplicitGraph
from ..geom import Disc, Rect, RobotModel, config_collides
from ..oracle import build_explicit, optimal_cost
from ..planner import goal_satisfied
from ..roadmap import RoadmapConstructionError, RoadmapParams
from .pipeline import Prepared, build_roadmaps, voxelize_all
from .scenario import GridSpec, PlannerDefaults, Scenario, Segment, load_scenario, save_scenario, validate_scenario

PI = math.pi
SUITE = ("deadlock_corridor", "deadlock_table", "narrow_passage", "welding", "pick_and_place")


def _arm(base, lengths=(0.45, 0.35), radius=0.04, limits=None):
    n = len(lengths)
    limits = limits if limits is not None else [[-PI, PI]] * n
    return RobotModel(base, tuple(lengths), radius, limits)


def _ik(base, lengths, point, elbow=1.0, center=0.0):
    """Two-link inverse kinematics for a tip position; the shoulder angle is wrapped near ``center``."""
    l1, l2 = lengths
    dx, dy = point[0] - base[0], point[1] - base[1]
    c2 = (dx * dx + dy * dy - l1 * l1 - l2 * l2) / (2 * l1 * l2)
    if abs(c2) > 1:
        raise ValueError(f"point {point} out of reach")
    q2 = elbow * math.acos(c2)
    q1 = math.atan2(dy, dx) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    q1 = center + (q1 - center + PI) % (2 * PI) - PI
    return np.array([q1, q2])


def _polar(r, phi):
    return (r * math.cos(phi), r * math.sin(phi))


def deadlock_corridor() -> Scenario:
    """Robot 0 swings onto the spot where idle robot 1 rests; robot 1 has no goal and must clear out."""
    robots = [
        _arm([0.0, 0.0], limits=[[-PI / 2, PI], [-PI, PI]]),
        _arm([1.2, 0.0], limits=[[0.0, 3 * PI / 2], [-PI, PI]]),
    ]
    targets = [
        [np.array([PI / 2, 0.0]), np.array([0.0, 0.0])],
        [np.array([PI, 0.0]), np.array([PI / 2, 0.0])],
    ]
    segments = [
        Segment((0, 0), (1, None)),   # robot 1 idle: any-goal
        Segment((1, 1), (0, 0)),      # both return home; robot 1 must wait for robot 0
    ]
    return Scenario(
        "deadlock_corridor", robots, [], targets, segments,
        GridSpec(d_voxel=0.05), RoadmapParams(max_edge_length=0.3),
        PlannerDefaults(max_iterations=100_000), seed=11,
        description="two arms; the idle arm blocks the goal pose of the active one",
    )


def deadlock_table(max_edge_length=0.2) -> Scenario:
    """Four arms around a central disc; neighbours reach towards each other in mirrored pairs."""
    robots, targets = [], []
    lengths = (0.55, 0.45)
    for i in range(4):
        phi = i * PI / 2
        m = 1 if i % 2 == 0 else -1
        base = _polar(1.0, phi)
        inward = phi + PI
        robots.append(_arm(base, lengths, limits=[[inward - PI, inward + PI], [-PI, PI]]))
        targets.append([
            _ik(base, lengths, _polar(0.7, phi + m * 0.6), m, inward),
            _ik(base, lengths, _polar(0.3, phi + m * 0.5), m, inward),
        ])
    segments = [Segment((0, 0, 0, 0), (1, 1, 1, 1)), Segment((1, 1, 1, 1), (0, 0, 0, 0))]
    return Scenario(
        "deadlock_table", robots, [Disc([0.0, 0.0], 0.12)], targets, segments,
        GridSpec(d_voxel=0.05), RoadmapParams(max_edge_length=max_edge_length),
        PlannerDefaults(max_iterations=100_000), seed=5,
        description="four arms around a disc; neighbouring pairs reach into a shared quadrant",
    )


def narrow_passage(max_edge_length=0.2) -> Scenario:
    """A wall with one gap; two arms below take turns reaching through it while a third works above."""
    low, high = (0.7, 0.5), (0.55, 0.45)
    wall = [Rect([-1.9, -0.05], [-0.13, 0.05]), Rect([0.13, -0.05], [1.9, 0.05])]
    b0, b1, b2 = (-0.7, -0.45), (0.7, -0.45), (0.0, 0.85)
    robots = [
        _arm(b0, low, limits=[[-PI / 2, 3 * PI / 2], [-PI, PI]]),
        _arm(b1, low, limits=[[-PI / 2, 3 * PI / 2], [-PI, PI]]),
        _arm(b2, high, limits=[[-3 * PI / 2, PI / 2], [-PI, PI]]),
    ]
    targets = [
        [np.array([-0.9, 2.2]), _ik(b0, low, (-0.03, 0.2), 1, PI / 2)],
        [np.array([PI + 0.9, -2.2]), _ik(b1, low, (0.03, 0.2), -1, PI / 2)],
        [_ik(b2, high, (-0.55, 0.35), 1, -PI / 2), _ik(b2, high, (0.55, 0.35), -1, -PI / 2)],
    ]
    segments = [Segment((0, 1, 0), (1, 0, 1)), Segment((1, 0, 1), (0, 1, 0))]
    return Scenario(
        "narrow_passage", robots, wall, targets, segments,
        GridSpec(d_voxel=0.05), RoadmapParams(max_edge_length=max_edge_length),
        PlannerDefaults(max_iterations=100_000), seed=3,
        description="two arms share a single wall gap; a third sweeps across the gap from above",
    )


def welding(max_edge_length=0.3) -> Scenario:
    """Two arms weld five points each along the same edge of a workpiece, staggered."""
    lengths = (0.55, 0.45)
    b0, b1 = (-0.75, -0.6), (0.75, -0.6)
    robots = [
        _arm(b0, lengths, limits=[[-PI, PI], [-PI, PI]]),
        _arm(b1, lengths, limits=[[0.0, 2 * PI], [-PI, PI]]),
    ]
    work = Rect([-0.6, -0.25], [0.6, 0.1])
    targets = [
        [_ik(b0, lengths, (-0.5 + 0.15 * k, -0.34), 1, 0.0) for k in range(5)],
        [_ik(b1, lengths, (0.5 - 0.15 * k, -0.34), -1, PI) for k in range(5)],
    ]
    segments = [Segment((k, 4 - k), (k + 1, 3 - k)) for k in range(4)]
    return Scenario(
        "welding", robots, [work], targets, segments,
        GridSpec(d_voxel=0.05), RoadmapParams(max_edge_length=max_edge_length),
        PlannerDefaults(max_iterations=100_000), seed=7,
        description="multi-target sequence: two arms work along one edge of a shared workpiece",
    )


def pick_and_place(max_edge_length=0.3) -> Scenario:
    """Two facing arms pick and place over one shared strip with interleaved slots."""
    lengths = (0.5, 0.45)
    b0, b1 = (0.0, -0.75), (0.0, 0.75)
    robots = [
        _arm(b0, lengths, limits=[[-PI / 2, 3 * PI / 2], [-PI, PI]]),
        _arm(b1, lengths, limits=[[-3 * PI / 2, PI / 2], [-PI, PI]]),
    ]
    slots = [-0.45, -0.15, 0.15, 0.45]
    targets = [
        [_ik(b0, lengths, (-0.6, -0.5), 1, PI / 2)] + [_ik(b0, lengths, (x, -0.02), 1, PI / 2) for x in slots],
        [_ik(b1, lengths, (0.6, 0.5), 1, -PI / 2)] + [_ik(b1, lengths, (x, 0.02), 1, -PI / 2) for x in slots],
    ]
    segments = [
        Segment((0, 1), (1, None)),   # arm 0 picks at slot 0 while arm 1 is idle over slot 0
        Segment((1, 0), (3, 2)),      # arm 0 places at slot 2, arm 1 picks at slot 1
        Segment((3, 2), (0, 4)),      # arm 0 retreats, arm 1 places at slot 3
    ]
    return Scenario(
        "pick_and_place", robots, [], targets, segments,
        GridSpec(d_voxel=0.05), RoadmapParams(max_edge_length=max_edge_length),
        PlannerDefaults(max_iterations=100_000), seed=13,
        description="two facing arms share a strip of pick/place slots",
    )


def random_instance(rng, n_targets=3, max_nodes=12, max_tries=200) -> Scenario:
    """Small two-arm instance with overlapping workspaces; roadmaps stay at or below ``max_nodes``.

    Rejection-sampled: targets must be collision-free and mutually compatible
    at the segment endpoints.  Roadmap size is checked by the caller after
    building (see ``prepare_small``).
    """
    for _ in range(max_tries):
        gap = rng.uniform(0.5, 1.0)
        b0 = np.array([-gap / 2, rng.uniform(-0.2, 0.2)])
        b1 = np.array([gap / 2, rng.uniform(-0.2, 0.2)])
        robots = [
            _arm(b0, tuple(rng.uniform(0.3, 0.5, 2)), 0.04),
            _arm(b1, tuple(rng.uniform(0.3, 0.5, 2)), 0.04),
        ]
        obstacles = []
        if rng.random() < 0.5:
            obstacles.append(Disc(rng.uniform([-0.3, 0.4], [0.3, 0.7]), rng.uniform(0.05, 0.15)))
        targets = []
        for r in robots:
            ts = []
            while len(ts) < n_targets:
                q = rng.uniform(r.joint_limits[:, 0], r.joint_limits[:, 1])
                if not config_collides(r, q, obstacles):
                    ts.append(q)
            targets.append(ts)
        sc = Scenario(
            "random", robots, obstacles, targets, [Segment((0, 0), (n_targets - 1, n_targets - 1))],
            GridSpec(d_voxel=0.05), RoadmapParams(max_iterations=400, max_edge_length=1.0, shortcut_rounds=50, max_attempts=1),
            PlannerDefaults(max_iterations=1_000_000), seed=int(rng.integers(2**31)),
            description="random small instance",
        )
        yield sc


@dataclass
class SmallInstance:
    prepared: object
    problem: object
    optimum: float
    free_optimum: float     # optimum with inter-robot collisions ignored


def small_instances(rng, count: int, max_nodes: int = 12, interacting: bool = True, max_draws: int = 10_000):
    """Draw ``count`` solvable oracle-sized instances.

    With ``interacting`` only instances whose optimum is strictly worse than
    the collision-free optimum are kept, so robots must actually coordinate.
    """
    out = []
    draws = random_instance(rng, max_tries=max_draws)
    for sc in draws:
        try:
            roadmaps = build_roadmaps(sc)
        except RoadmapConstructionError:
            continue
        if max(rm.n_nodes for rm in roadmaps) > max_nodes:
            continue
        anns = voxelize_all(sc, roadmaps)
        prepared = Prepared(sc, roadmaps, anns, ImplicitGraph(sc.robots, anns))
        problem = prepared.problem(0)
        goal = partial(goal_satisfied, problem)
        opt, _ = optimal_cost(build_explicit(prepared.graph), problem.start, goal)
        if not math.isfinite(opt):
            continue
        free, _ = optimal_cost(build_explicit(prepared.graph, check_validity=False), problem.start, goal)
        if interacting and not opt > free + 1e-9:
            continue
        out.append(SmallInstance(prepared, problem, opt, free))
        if len(out) == count:
            return out
    raise RuntimeError(f"only {len(out)} of {count} small instances found")


SCENARIO_BUILDERS = {
    "deadlock_corridor": deadlock_corridor,
    "deadlock_table": deadlock_table,
    "narrow_passage": narrow_passage,
    "welding": welding,
    "pick_and_place": pick_and_place,
}


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("fastdrrt") / "scenarios" / f"{name}.json"))


def load_bundled(name: str) -> Scenario:
    return load_scenario(bundled_path(name))


def write_bundled(out_dir=None):
    out = Path(out_dir) if out_dir else Path(__file__).resolve().parent.parent / "scenarios"
    out.mkdir(parents=True, exist_ok=True)
    for name, build in SCENARIO_BUILDERS.items():
        sc = build()
        validate_scenario(sc)
        save_scenario(sc, out / f"{name}.json")


if __name__ == "__main__":
    write_bundled()
