"""Implicit tensor-product graph over per-robot annotated roadmaps.

A composite vertex is a tuple of per-robot node ids.  ``w`` neighbours ``v``
when every robot either stays or crosses one roadmap edge and at least one
robot moves.  Edge validity is decided purely from the precomputed voxel
volumes: a moving robot contributes its edge volume, a standing one the
volume of its node.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .sweptvol import AnnotatedRoadmap, voxelsets_intersect, warm_up


class InvalidEdgeError(ValueError):
    pass


class AnnotationIncompleteError(RuntimeError):
    pass


class ImplicitGraph:
    def __init__(self, robots, annotations):
        if len(robots) != len(annotations):
            raise ValueError("one annotated roadmap per robot required")
        if len(robots) < 2:
            raise ValueError("an implicit graph needs at least two robots")
        grids = {a.grid for a in annotations}
        if len(grids) != 1:
            raise ValueError("all annotations must share one voxel grid")
        for a in annotations:
            if len(a.node_volumes) != a.roadmap.n_nodes or len(a.edge_volumes) != a.roadmap.n_edges:
                raise AnnotationIncompleteError("annotation does not cover every node and edge")
        self.robots = list(robots)
        self.annotations: list[AnnotatedRoadmap] = list(annotations)
        self.roadmaps = [a.roadmap for a in annotations]
        self.grid = annotations[0].grid
        self.n_robots = len(robots)
        self.dofs = [r.dof for r in robots]
        self.offsets = np.concatenate([[0], np.cumsum(self.dofs)]).astype(int)
        self.dim = int(self.offsets[-1])
        self.lower = np.concatenate([r.joint_limits[:, 0] for r in robots])
        self.upper = np.concatenate([r.joint_limits[:, 1] for r in robots])
        # per-robot volume lists indexed as node id, or n_nodes + edge id
        self._volumes = [list(a.node_volumes) + list(a.edge_volumes) for a in annotations]
        self._boxes = [np.concatenate([a.node_boxes, a.edge_boxes]).tolist() for a in annotations]
        self._n_nodes = [a.roadmap.n_nodes for a in annotations]
        self._edge_index = [a.roadmap._edge_index for a in annotations]
        self._edge_cost = [a.roadmap.edge_costs.tolist() for a in annotations]
        self._stay = [[(u,) + a.roadmap.adjacency[u] for u in range(a.roadmap.n_nodes)] for a in annotations]
        self._pairs = [(i, j) for i in range(self.n_robots) for j in range(i + 1, self.n_robots)]
        warm_up()

    # -- vertices ----------------------------------------------------------

    def check_vertex(self, v):
        if len(v) != self.n_robots or any(not 0 <= int(n) < k for n, k in zip(v, self._n_nodes)):
            raise ValueError(f"invalid composite vertex {v}")

    def config(self, v) -> np.ndarray:
        """Concatenated joint vector of a composite vertex."""
        return np.concatenate([rm.nodes[n] for rm, n in zip(self.roadmaps, v)])

    def state(self, v) -> tuple:
        return tuple(rm.nodes[n].copy() for rm, n in zip(self.roadmaps, v))

    def moves(self, v):
        """Per-robot option lists (stay first, then roadmap neighbours)."""
        return [self._stay[i][n] for i, n in enumerate(v)]

    def neighbors(self, v):
        """All composite neighbours of ``v`` (the all-stay tuple is excluded)."""
        v = tuple(v)
        for w in itertools.product(*self.moves(v)):
            if w != v:
                yield w

    def is_neighbor(self, v, w) -> bool:
        if tuple(v) == tuple(w) or len(v) != len(w):
            return False
        return all(a == b or (a, b) in self._edge_index[i] for i, (a, b) in enumerate(zip(v, w)))

    # -- costs -------------------------------------------------------------

    def edge_cost(self, v, w) -> float:
        """Concatenated-L2 move length; standing robots contribute zero."""
        s = 0.0
        for i in range(self.n_robots):
            a, b = v[i], w[i]
            if a != b:
                e = self._edge_index[i].get((a, b))
                if e is None:
                    raise InvalidEdgeError(f"{v} -> {w}: robot {i} has no edge {a}-{b}")
                c = self._edge_cost[i][e]
                s += c * c
        return math.sqrt(s)

    # -- validity ----------------------------------------------------------

    def _volume_id(self, i, a, b):
        if a == b:
            return a
        e = self._edge_index[i].get((a, b))
        if e is None:
            raise InvalidEdgeError(f"robot {i} has no edge {a}-{b}")
        return self._n_nodes[i] + e

    def volumes_intersect(self, i, vi, j, vj) -> bool:
        bi = self._boxes[i][vi]
        bj = self._boxes[j][vj]
        if bi[1] < bj[0] or bj[1] < bi[0] or bi[3] < bj[2] or bj[3] < bi[2]:
            return False
        return voxelsets_intersect(self._volumes[i][vi], self._volumes[j][vj])

    def is_edge_valid(self, v, w, memo: dict | None = None) -> bool:
        """Swept-volume validity of the composite move v -> w (order-independent).

        ``memo`` caches pairwise volume tests; it only speeds up repeated
        queries and never changes an answer.
        """
        ids = [self._volume_id(i, v[i], w[i]) for i in range(self.n_robots)]
        for i, j in self._pairs:
            if memo is None:
                hit = self.volumes_intersect(i, ids[i], j, ids[j])
            else:
                key = (i, ids[i], j, ids[j])
                hit = memo.get(key)
                if hit is None:
                    hit = memo[key] = self.volumes_intersect(i, ids[i], j, ids[j])
            if hit:
                return False
        return True

    def is_vertex_valid(self, v, memo: dict | None = None) -> bool:
        return self.is_edge_valid(v, v, memo)


def composite_distance(a, b) -> float:
    """L2 norm of the concatenated per-robot angle differences."""
    s = 0.0
    for qa, qb in zip(a, b):
        d = np.asarray(qb, dtype=float) - np.asarray(qa, dtype=float)
        s += float(np.dot(d, d))
    return math.sqrt(s)


def sample_random(graph: ImplicitGraph, rng) -> tuple:
    """Independent uniform sample inside every robot's joint limits."""
    x = rng.uniform(graph.lower, graph.upper)
    return tuple(x[graph.offsets[i]: graph.offsets[i + 1]] for i in range(graph.n_robots))


def nearest(tree, x_rand) -> tuple:
    """Tree vertex closest to ``x_rand``; ties go to the earliest inserted vertex."""
    x = np.concatenate([np.asarray(q, dtype=float) for q in x_rand]) if isinstance(x_rand, tuple) else x_rand
    return tree.vertices[tree.nearest_index(x)]


__all__ = [
    "ImplicitGraph", "InvalidEdgeError", "AnnotationIncompleteError",
    "composite_distance", "sample_random", "nearest",
]
