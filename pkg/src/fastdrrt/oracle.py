"""Ground truth for small instances.

``build_explicit`` materializes the whole product graph with the very same
validity and cost functions the planner uses, so Dijkstra over it yields the
optimum the planner converges to.  ``exact_swept_overlap`` is the dense
capsule-sampling referent the voxel approximation is audited against.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .composite import ImplicitGraph
from .geom import RobotModel, interpolate, link_segments_batch, segment_distance

DEFAULT_CAP = 10**6


class ProductGraphTooLarge(ValueError):
    pass


@dataclass
class ExplicitProductGraph:
    vertices: list
    index: dict
    adjacency: list  # adjacency[k] -> list of (neighbor index, cost)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def edge_set(self) -> set:
        return {(self.vertices[a], self.vertices[b]) for a, nbrs in enumerate(self.adjacency) for b, _ in nbrs}


def build_explicit(graph: ImplicitGraph, cap: int = DEFAULT_CAP, check_validity: bool = True) -> ExplicitProductGraph:
    """Enumerate the product graph; ``check_validity=False`` ignores inter-robot collisions."""
    sizes = [rm.n_nodes for rm in graph.roadmaps]
    total = math.prod(sizes)
    if total > cap:
        raise ProductGraphTooLarge(f"product graph has {total} vertices, cap is {cap}")
    vertices = list(itertools.product(*(range(n) for n in sizes)))
    index = {v: k for k, v in enumerate(vertices)}
    adjacency = [[] for _ in vertices]
    memo: dict = {}
    for k, v in enumerate(vertices):
        for w in graph.neighbors(v):
            j = index[w]
            if j < k:
                continue  # each undirected edge once
            if not check_validity or graph.is_edge_valid(v, w, memo):
                c = graph.edge_cost(v, w)
                adjacency[k].append((j, c))
                adjacency[j].append((k, c))
    return ExplicitProductGraph(vertices, index, adjacency)


def optimal_cost(explicit: ExplicitProductGraph, start, goal_predicate):
    """Dijkstra to the nearest vertex satisfying ``goal_predicate``; (inf, []) if unreachable."""
    s = explicit.index[tuple(start)]
    dist = {s: 0.0}
    prev = {s: -1}
    heap = [(0.0, s)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if goal_predicate(explicit.vertices[u]):
            path = []
            while u >= 0:
                path.append(explicit.vertices[u])
                u = prev[u]
            return d, path[::-1]
        for w, c in explicit.adjacency[u]:
            nd = d + c
            if nd < dist.get(w, math.inf):
                dist[w] = nd
                prev[w] = u
                heapq.heappush(heap, (nd, w))
    return math.inf, []


def _motion_segments(robot: RobotModel, motion, step: float):
    q_a, q_b = motion
    A, B = link_segments_batch(robot, interpolate(q_a, q_b, step))
    return A.reshape(-1, 2), B.reshape(-1, 2)


def exact_swept_overlap(robot_i: RobotModel, motion_i, robot_j: RobotModel, motion_j, sample_step: float,
                        chunk: int = 512) -> bool:
    """Space-only overlap of two sampled motions (every sample pair, every link pair)."""
    Ai, Bi = _motion_segments(robot_i, motion_i, sample_step)
    Aj, Bj = _motion_segments(robot_j, motion_j, sample_step)
    reach = robot_i.link_radius + robot_j.link_radius
    lo_i = np.minimum(Ai.min(0), Bi.min(0)) - reach
    hi_i = np.maximum(Ai.max(0), Bi.max(0)) + reach
    lo_j = np.minimum(Aj.min(0), Bj.min(0))
    hi_j = np.maximum(Aj.max(0), Bj.max(0))
    if np.any(hi_i < lo_j) or np.any(hi_j < lo_i):
        return False
    for s in range(0, len(Ai), chunk):
        d = segment_distance(Ai[s:s + chunk, None], Bi[s:s + chunk, None], Aj[None], Bj[None])
        if np.any(d <= reach):
            return True
    return False


def composite_edge_exact_valid(graph: ImplicitGraph, v, w, sample_step) -> bool:
    """Exact counterpart of ``ImplicitGraph.is_edge_valid`` (sample step per robot or scalar)."""
    steps = sample_step if isinstance(sample_step, (list, tuple)) else [sample_step] * graph.n_robots
    motions = [(rm.nodes[a], rm.nodes[b]) for rm, a, b in zip(graph.roadmaps, v, w)]
    for i in range(graph.n_robots):
        for j in range(i + 1, graph.n_robots):
            step = min(steps[i], steps[j])
            if exact_swept_overlap(graph.robots[i], motions[i], graph.robots[j], motions[j], step):
                return False
    return True


__all__ = [
    "DEFAULT_CAP", "ProductGraphTooLarge", "ExplicitProductGraph", "build_explicit", "optimal_cost",
    "exact_swept_overlap", "composite_edge_exact_valid",
]
