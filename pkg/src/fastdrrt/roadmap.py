"""Per-robot roadmaps grown from best-effort paths between every pair of targets.

Each unordered target pair is solved with RRT-Connect, shortcut, and the
resulting waypoints are unioned into one sparse graph.  ``next_hop_policy``
turns a roadmap plus a goal set into the per-robot "next element on path"
table the informed expansion follows.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geom import RobotModel, config_collides, config_distance, motion_collides

ROADMAP_FORMAT_VERSION = 1


class PlanningFailed(RuntimeError):
    """RRT-Connect exhausted its iteration budget."""


class RoadmapConstructionError(RuntimeError):
    def __init__(self, pair, message: str):
        super().__init__(message)
        self.pair = pair


@dataclass
class RoadmapParams:
    step_size: float = 0.25         # RRT extension step (rad)
    collision_step: float = 0.02    # edge validity resolution (rad)
    max_iterations: int = 5000
    shortcut_rounds: int = 100
    merge_tol: float = 1e-6
    max_edge_length: Optional[float] = None  # subdivide longer edges into collinear pieces
    max_attempts: int = 3

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "RoadmapParams":
        return cls(**(d or {}))


@dataclass
class Roadmap:
    nodes: np.ndarray          # (n, dof)
    edges: np.ndarray          # (m, 2) int, u < v
    target_nodes: list         # node index of target k
    edge_costs: np.ndarray = field(init=False)
    adjacency: list = field(init=False, repr=False)
    _edge_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim == 1:
            self.nodes = self.nodes.reshape(0, 0) if self.nodes.size == 0 else self.nodes[None]
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.target_nodes = [int(t) for t in self.target_nodes]
        self.edge_costs = np.linalg.norm(self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]], axis=1)
        adj = [[] for _ in range(len(self.nodes))]
        self._edge_index = {}
        for e, (u, v) in enumerate(self.edges):
            u, v = int(u), int(v)
            if u == v:
                raise ValueError("roadmap edges may not be self-loops")
            adj[u].append(v)
            adj[v].append(u)
            self._edge_index[(u, v)] = e
            self._edge_index[(v, u)] = e
        self.adjacency = [tuple(sorted(a)) for a in adj]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> tuple:
        return self.adjacency[u]

    def edge_index(self, u: int, v: int) -> int:
        return self._edge_index[(u, v)]

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self._edge_index

    def edge_cost(self, u: int, v: int) -> float:
        return float(self.edge_costs[self._edge_index[(u, v)]])

    def to_dict(self) -> dict:
        return {
            "version": ROADMAP_FORMAT_VERSION,
            "nodes": self.nodes.tolist(),
            "edges": self.edges.tolist(),
            "target_nodes": list(self.target_nodes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Roadmap":
        if d.get("version") != ROADMAP_FORMAT_VERSION:
            raise ValueError(f"unsupported roadmap version {d.get('version')!r}")
        return cls(np.asarray(d["nodes"], dtype=float), d["edges"], d["target_nodes"])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Roadmap":
        return cls.from_dict(json.loads(Path(path).read_text()))


def path_cost(path) -> float:
    return float(sum(config_distance(a, b) for a, b in zip(path[:-1], path[1:])))


# ---------------------------------------------------------------------------
# RRT-Connect


class _Tree:
    def __init__(self, root, dof):
        self.q = np.empty((64, dof))
        self.q[0] = root
        self.parent = [-1]
        self.n = 1

    def add(self, q, parent):
        if self.n == len(self.q):
            self.q = np.concatenate([self.q, np.empty_like(self.q)])
        self.q[self.n] = q
        self.parent.append(parent)
        self.n += 1
        return self.n - 1

    def nearest(self, q):
        d = np.sum((self.q[: self.n] - q) ** 2, axis=1)
        return int(np.argmin(d))

    def branch(self, i):
        out = []
        while i >= 0:
            out.append(self.q[i].copy())
            i = self.parent[i]
        return out


_TRAPPED, _ADVANCED, _REACHED = 0, 1, 2


def _extend(robot, tree, q_target, obstacles, params):
    i = tree.nearest(q_target)
    q_near = tree.q[i]
    d = q_target - q_near
    dist = float(np.linalg.norm(d))
    if dist <= params.step_size:
        q_new, status = q_target.copy(), _REACHED
    else:
        q_new, status = q_near + d * (params.step_size / dist), _ADVANCED
    if motion_collides(robot, q_near, q_new, obstacles, params.collision_step):
        return _TRAPPED, -1
    return status, tree.add(q_new, i)


def rrt_connect(robot: RobotModel, q_start, q_goal, obstacles, params: RoadmapParams, rng) -> list:
    """Bidirectional RRT with greedy connect; returns the waypoint list start..goal."""
    q_start = np.asarray(q_start, dtype=float)
    q_goal = np.asarray(q_goal, dtype=float)
    if config_distance(q_start, q_goal) <= params.merge_tol:
        return [q_start.copy()]
    if not motion_collides(robot, q_start, q_goal, obstacles, params.collision_step):
        return [q_start.copy(), q_goal.copy()]

    lo, hi = robot.joint_limits[:, 0], robot.joint_limits[:, 1]
    ta, tb = _Tree(q_start, robot.dof), _Tree(q_goal, robot.dof)
    a_is_start = True
    for _ in range(params.max_iterations):
        q_rand = rng.uniform(lo, hi)
        status, ia = _extend(robot, ta, q_rand, obstacles, params)
        if status != _TRAPPED:
            q_new = ta.q[ia].copy()
            while True:
                status_b, ib = _extend(robot, tb, q_new, obstacles, params)
                if status_b != _ADVANCED:
                    break
            if status_b == _REACHED:
                half_a = ta.branch(ia)[::-1]
                half_b = tb.branch(tb.parent[ib])
                path = half_a + half_b
                return path if a_is_start else path[::-1]
        ta, tb = tb, ta
        a_is_start = not a_is_start
    raise PlanningFailed(f"RRT-Connect found no path within {params.max_iterations} iterations")


def shortcut(robot: RobotModel, path, obstacles, rng, rounds: int, step: float) -> list:
    """Random vertex-to-vertex shortcutting; cost never increases, endpoints fixed."""
    path = [np.asarray(q, dtype=float) for q in path]
    for _ in range(rounds):
        if len(path) < 3:
            break
        i, j = sorted(rng.choice(len(path), size=2, replace=False))
        if j - i < 2:
            continue
        if not motion_collides(robot, path[i], path[j], obstacles, step):
            path = path[: i + 1] + path[j:]
    return path


def _subdivide(path, max_len):
    out = [path[0]]
    for a, b in zip(path[:-1], path[1:]):
        n = int(np.ceil(config_distance(a, b) / max_len))
        for k in range(1, n):
            out.append(a + (b - a) * (k / n))
        out.append(b)
    return out


def build_roadmap(robot: RobotModel, targets, obstacles, params: RoadmapParams, rng) -> Roadmap:
    targets = [np.asarray(t, dtype=float) for t in targets]
    if not targets:
        raise ValueError("build_roadmap needs at least one target")
    for k, t in enumerate(targets):
        if not robot.within_limits(t) or config_collides(robot, t, obstacles):
            raise RoadmapConstructionError((k, k), f"target {k} is outside limits or in collision")

    nodes: list = []
    edges: set = set()

    def add_node(q):
        for i, p in enumerate(nodes):
            if config_distance(p, q) <= params.merge_tol:
                return i
        nodes.append(np.asarray(q, dtype=float).copy())
        return len(nodes) - 1

    target_nodes = [add_node(t) for t in targets]
    for a in range(len(targets)):
        for b in range(a + 1, len(targets)):
            path = None
            for _ in range(params.max_attempts):
                try:
                    path = rrt_connect(robot, targets[a], targets[b], obstacles, params, rng)
                    break
                except PlanningFailed:
                    continue
            if path is None:
                raise RoadmapConstructionError((a, b), f"no path between targets {a} and {b}")
            path = shortcut(robot, path, obstacles, rng, params.shortcut_rounds, params.collision_step)
            if params.max_edge_length:
                path = _subdivide(path, params.max_edge_length)
            ids = [add_node(q) for q in path]
            for u, v in zip(ids[:-1], ids[1:]):
                if u != v:
                    edges.add((min(u, v), max(u, v)))

    return Roadmap(np.array(nodes), sorted(edges), target_nodes)


def validate_roadmap(roadmap: Roadmap, robot: RobotModel, obstacles, step: float) -> list:
    """Post-hoc re-validation; returns a list of human-readable violations."""
    problems = []
    for i, q in enumerate(roadmap.nodes):
        if config_collides(robot, q, obstacles):
            problems.append(f"node {i} in collision")
    for e, (u, v) in enumerate(roadmap.edges):
        if motion_collides(robot, roadmap.nodes[u], roadmap.nodes[v], obstacles, step):
            problems.append(f"edge {e} ({u},{v}) in collision")
    return problems


# ---------------------------------------------------------------------------
# goal policy


@dataclass(frozen=True)
class NextHopPolicy:
    goal_set: frozenset
    next_hop: np.ndarray       # -1 where the node cannot reach the goal set
    cost_to_goal: np.ndarray   # inf where unreachable

    def hop(self, u: int) -> int:
        return int(self.next_hop[u])

    def nearest_goal(self, u: int) -> int:
        """Goal node reached by following next_hop from ``u`` (-1 if none)."""
        if self.next_hop[u] < 0:
            return -1
        while int(self.next_hop[u]) != u:
            u = int(self.next_hop[u])
        return u


def next_hop_policy(roadmap: Roadmap, goal_set) -> NextHopPolicy:
    """Multi-source Dijkstra from the goal set over roadmap edge costs."""
    goals = frozenset(int(g) for g in goal_set)
    if not goals:
        raise ValueError("goal_set must be non-empty")
    if any(g < 0 or g >= roadmap.n_nodes for g in goals):
        raise ValueError("goal_set contains nodes outside the roadmap")
    n = roadmap.n_nodes
    dist = np.full(n, np.inf)
    hop = np.full(n, -1, dtype=np.int64)
    heap = []
    for g in sorted(goals):
        dist[g] = 0.0
        hop[g] = g
        heap.append((0.0, g))
    heapq.heapify(heap)
    done = np.zeros(n, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for w in roadmap.adjacency[u]:
            nd = d + roadmap.edge_cost(u, w)
            if nd < dist[w]:
                dist[w] = nd
                hop[w] = u
                heapq.heappush(heap, (nd, w))
    dist.setflags(write=False)
    hop.setflags(write=False)
    return NextHopPolicy(goals, hop, dist)


def random_neighbor(roadmap: Roadmap, node: int, rng) -> int:
    """Uniform draw from adjacency(node) plus the node itself."""
    adj = roadmap.adjacency[node]
    k = int(rng.integers(len(adj) + 1))
    return node if k == 0 else adj[k - 1]


__all__ = [
    "ROADMAP_FORMAT_VERSION", "PlanningFailed", "RoadmapConstructionError", "RoadmapParams", "Roadmap",
    "path_cost", "rrt_connect", "shortcut", "build_roadmap", "validate_roadmap",
    "NextHopPolicy", "next_hop_policy", "random_neighbor",
]
