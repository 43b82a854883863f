"""Fast-dRRT* and the dRRT* baseline over an :class:`ImplicitGraph`.

The main loop follows the Fast-dRRT* iteration exactly: after a successful
extension the next one is goal-directed from the vertex just added; after a
failed one a random state is sampled and the tree grows from its nearest
vertex.  The dRRT* baseline differs only by the rewiring cycle: the parent
of every new vertex is chosen among its tree-resident composite neighbours,
and those neighbours are rewired through it when that is cheaper.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .composite import ImplicitGraph
from .roadmap import NextHopPolicy, next_hop_policy, random_neighbor


class _AnyGoal:
    """Goal marker for robots without an assigned goal; always satisfied."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ANY"

    def __reduce__(self):
        return (_AnyGoal, ())


ANY = _AnyGoal()


class Mode(str, enum.Enum):
    FAST_DRRT_STAR = "fast"
    DRRT_STAR = "drrt"


class ExpansionRule(str, enum.Enum):
    RANDOM_NEIGHBOR = "random_neighbor"
    DIRECTION_ORACLE = "direction_oracle"


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    start: tuple
    goal_sets: tuple  # per robot: frozenset of node ids, or ANY

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(n) for n in self.start))
        goals = tuple(ANY if g is ANY else frozenset(int(x) for x in g) for g in self.goal_sets)
        object.__setattr__(self, "goal_sets", goals)
        if len(goals) != len(self.start):
            raise ProblemError("one goal set per robot required")
        if all(g is ANY for g in goals):
            raise ProblemError("at least one robot needs a defined goal")
        if any(g is not ANY and not g for g in goals):
            raise ProblemError("goal sets must be non-empty")

    def check(self, graph: ImplicitGraph):
        graph.check_vertex(self.start)
        for i, g in enumerate(self.goal_sets):
            if g is not ANY and any(not 0 <= n < graph.roadmaps[i].n_nodes for n in g):
                raise ProblemError(f"goal set of robot {i} leaves its roadmap")

    @property
    def goal_robots(self) -> list:
        return [i for i, g in enumerate(self.goal_sets) if g is not ANY]


# ---------------------------------------------------------------------------
# termination conditions


@dataclass(frozen=True)
class MaxIterations:
    n: int

    def done(self, s) -> bool:
        return s.iterations >= self.n


@dataclass(frozen=True)
class TimeLimit:
    seconds: float

    def done(self, s) -> bool:
        return s.elapsed_ns() >= self.seconds * 1e9


@dataclass(frozen=True)
class FirstSolution:
    def done(self, s) -> bool:
        return s.best_cost < math.inf


@dataclass(frozen=True)
class CostConvergence:
    """Fires once the best cost has not dropped by more than ``epsilon`` for ``window`` iterations."""

    window: int
    epsilon: float = 0.0

    def done(self, s) -> bool:
        if s.best_cost == math.inf or s.iterations < self.window:
            return False
        earlier = math.inf
        for _, it, c in s.timeline:
            if it > s.iterations - self.window:
                break
            earlier = c
        return earlier - s.best_cost <= self.epsilon


@dataclass(frozen=True)
class CostThreshold:
    """Fires once a solution at or below ``cost`` exists."""

    cost: float

    def done(self, s) -> bool:
        return s.best_cost <= self.cost


@dataclass(frozen=True)
class AllOf:
    terms: tuple

    def done(self, s) -> bool:
        return all(t.done(s) for t in self.terms)


@dataclass
class PlannerConfig:
    ptc: tuple = (MaxIterations(10_000),)
    mode: Mode = Mode.FAST_DRRT_STAR
    expansion_rule: ExpansionRule = ExpansionRule.RANDOM_NEIGHBOR
    seed: int = 0
    rewire_cycle: bool = True       # only consulted in DRRT_STAR mode
    freeze_any_goal: bool = False   # ablation: any-goal robots never move
    debug_checks: bool = False      # re-derive tree costs after every iteration
    record_trace: bool = False

    def __post_init__(self):
        if not isinstance(self.ptc, (tuple, list)):
            self.ptc = (self.ptc,)
        self.ptc = tuple(self.ptc)
        if not self.ptc:
            raise ValueError("at least one termination condition is required")
        self.mode = Mode(self.mode)
        self.expansion_rule = ExpansionRule(self.expansion_rule)


@dataclass
class PlanStats:
    iterations: int = 0
    time_to_first_ns: Optional[int] = None
    iterations_to_first: Optional[int] = None
    cost_first: Optional[float] = None
    timeline: list = field(default_factory=list)  # (elapsed_ns, iteration, best_cost)
    tree_size: int = 0
    rewires: int = 0
    elapsed_ns: int = 0

    def cost_at(self, elapsed_ns=None, iteration=None) -> Optional[float]:
        """Best cost known at a wall-clock or iteration budget (None if unsolved by then)."""
        best = None
        for t, it, c in self.timeline:
            if (elapsed_ns is not None and t > elapsed_ns) or (iteration is not None and it > iteration):
                break
            best = c
        return best


@dataclass
class PlanResult:
    best_path: list
    best_cost: float
    stats: PlanStats
    trace: Optional[list] = None

    @property
    def solved(self) -> bool:
        return bool(self.best_path)


@dataclass
class BestPath:
    path: list = field(default_factory=list)
    cost: float = math.inf


# ---------------------------------------------------------------------------
# search tree


class TreeInvariantError(AssertionError):
    pass


class SearchTree:
    """Tree over composite vertices with parent links and cost-to-come."""

    def __init__(self, graph: ImplicitGraph, root):
        root = tuple(root)
        self.graph = graph
        self.vertices = [root]
        self.index = {root: 0}
        self.parent = [-1]
        self.cost = [0.0]
        self.edge = [0.0]   # cost of the edge from the parent
        self.children = [[]]
        self.goal_hits = []
        self._X = np.empty((256, graph.dim))
        self._X[0] = graph.config(root)

    def __len__(self):
        return len(self.vertices)

    def __contains__(self, v):
        return tuple(v) in self.index

    def add(self, v, parent: int, edge_cost: float) -> int:
        i = len(self.vertices)
        if i == len(self._X):
            self._X = np.concatenate([self._X, np.empty_like(self._X)])
        self._X[i] = self.graph.config(v)
        self.vertices.append(v)
        self.index[v] = i
        self.parent.append(parent)
        self.edge.append(edge_cost)
        self.cost.append(self.cost[parent] + edge_cost)
        self.children.append([])
        self.children[parent].append(i)
        return i

    def nearest_index(self, x) -> int:
        d = self._X[: len(self.vertices)] - x
        return int(np.argmin(np.einsum("ij,ij->i", d, d)))

    def is_ancestor(self, a: int, b: int) -> bool:
        """True if ``a`` lies on the root path of ``b`` (including ``a == b``)."""
        while b >= 0:
            if b == a:
                return True
            b = self.parent[b]
        return False

    def reparent(self, i: int, new_parent: int, edge_cost: float):
        """Move ``i`` under ``new_parent`` and refresh subtree costs.

        Returns the re-costed subtree indices, or None when the move would
        close a cycle.
        """
        if self.is_ancestor(i, new_parent):
            return None
        self.children[self.parent[i]].remove(i)
        self.children[new_parent].append(i)
        self.parent[i] = new_parent
        self.edge[i] = edge_cost
        changed = [i]
        k = 0
        cost, edge, parent, children = self.cost, self.edge, self.parent, self.children
        while k < len(changed):
            u = changed[k]
            cost[u] = cost[parent[u]] + edge[u]
            changed.extend(children[u])
            k += 1
        return changed

    def path(self, i: int) -> list:
        out = []
        while i >= 0:
            out.append(self.vertices[i])
            i = self.parent[i]
        return out[::-1]

    def check(self, tol: float = 1e-9):
        """Verify single root, acyclicity and cost consistency against fresh edge costs."""
        g = self.graph
        if self.parent[0] != -1 or self.cost[0] != 0.0:
            raise TreeInvariantError("root must have no parent and zero cost")
        for i in range(1, len(self.vertices)):
            p = self.parent[i]
            if p < 0:
                raise TreeInvariantError(f"vertex {i} has no parent")
            expect = self.cost[p] + g.edge_cost(self.vertices[p], self.vertices[i])
            if abs(self.cost[i] - expect) > tol:
                raise TreeInvariantError(f"vertex {i}: cost {self.cost[i]} != {expect}")
        seen = [0]
        for u in seen:
            for c in self.children[u]:
                if self.parent[c] != u:
                    raise TreeInvariantError(f"child list of {u} disagrees with parent of {c}")
                seen.append(c)
            if len(seen) > len(self.vertices):
                raise TreeInvariantError("parent structure contains a cycle")
        if len(seen) != len(self.vertices):
            raise TreeInvariantError("tree is not connected to the root")


# ---------------------------------------------------------------------------
# building blocks


def goal_satisfied(problem: ProblemSpec, v) -> bool:
    return all(g is ANY or v[i] in g for i, g in enumerate(problem.goal_sets))


def build_policies(graph: ImplicitGraph, problem: ProblemSpec) -> list:
    return [None if g is ANY else next_hop_policy(graph.roadmaps[i], g) for i, g in enumerate(problem.goal_sets)]


def _direction_neighbor(roadmap, node, x):
    """Neighbour whose direction from ``node`` makes the smallest angle with ``x - node``."""
    adj = roadmap.adjacency[node]
    q = roadmap.nodes[node]
    d = np.asarray(x, dtype=float) - q
    dn = float(np.linalg.norm(d))
    if not adj or dn == 0.0:
        return node
    best, best_cos = node, -2.0
    for w in adj:
        e = roadmap.nodes[w] - q
        c = float(np.dot(e, d)) / (float(np.linalg.norm(e)) * dn)
        if c > best_cos:
            best, best_cos = w, c
    return best


def informed_any_goal_expansion(graph: ImplicitGraph, problem: ProblemSpec, policies, v_last, v_near, x_rand, rng,
                                rule: ExpansionRule = ExpansionRule.RANDOM_NEIGHBOR,
                                freeze_any_goal: bool = False):
    """Propose ``v_new`` from ``v_near``.

    Without a last vertex every robot (any-goal robots included) moves to a
    random roadmap neighbour or stays.  Otherwise any-goal robots stay and
    goal robots take their next hop towards the goal.  Returns None when a
    goal robot sits outside its goal's connected component.
    """
    out = []
    for i, n in enumerate(v_near):
        goal = problem.goal_sets[i]
        if v_last is None:
            if freeze_any_goal and goal is ANY:
                out.append(n)
            elif rule is ExpansionRule.RANDOM_NEIGHBOR:
                out.append(random_neighbor(graph.roadmaps[i], n, rng))
            else:
                xi = x_rand[i] if isinstance(x_rand, tuple) else x_rand[graph.offsets[i]: graph.offsets[i + 1]]
                out.append(_direction_neighbor(graph.roadmaps[i], n, xi))
        elif goal is ANY:
            out.append(n)
        else:
            h = int(policies[i].next_hop[n])
            if h < 0:
                return None
            out.append(h)
    return tuple(out)


def update_path(tree: SearchTree, best: BestPath, problem: ProblemSpec) -> BestPath:
    """Replace ``best`` by the cheapest goal-satisfying tree path if strictly cheaper."""
    if not tree.goal_hits:
        return best
    i = min(tree.goal_hits, key=lambda k: (tree.cost[k], k))
    if tree.cost[i] < best.cost:
        return BestPath(tree.path(i), tree.cost[i])
    return best


def rewire(tree: SearchTree, v_near, v_new):
    """Re-hang ``v_new`` below ``v_near``; returns the re-costed subtree or None if rejected."""
    i = tree.index[tuple(v_new)]
    j = tree.index[tuple(v_near)]
    return tree.reparent(i, j, tree.graph.edge_cost(v_near, v_new))


class _Draws:
    """Buffered uniform stream over a seeded numpy Generator."""

    def __init__(self, seed, block: int = 4096):
        self._gen = np.random.default_rng(seed)
        self._block = block
        self._buf = []
        self._k = 0

    def random(self) -> float:
        if self._k == len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            self._k = 0
        u = self._buf[self._k]
        self._k += 1
        return u

    def integers(self, high: int) -> int:
        return min(int(self.random() * high), high - 1)

    def uniform(self, low, high) -> np.ndarray:
        u = np.fromiter((self.random() for _ in range(len(low))), dtype=float, count=len(low))
        return low + u * (high - low)


class _PtcState:
    __slots__ = ("iterations", "best_cost", "timeline", "t0")

    def __init__(self, t0, timeline):
        self.iterations = 0
        self.best_cost = math.inf
        self.timeline = timeline
        self.t0 = t0

    def elapsed_ns(self) -> int:
        return time.perf_counter_ns() - self.t0


# ---------------------------------------------------------------------------
# main loop


def _goal_x(graph, problem, policies):
    parts = []
    for i, n in enumerate(problem.start):
        if problem.goal_sets[i] is ANY:
            parts.append(graph.roadmaps[i].nodes[n])
        else:
            g = policies[i].nearest_goal(n)
            if g < 0:
                g = min(problem.goal_sets[i])
            parts.append(graph.roadmaps[i].nodes[g])
    return tuple(parts)


def _run(graph: ImplicitGraph, problem: ProblemSpec, config: PlannerConfig, policies=None) -> PlanResult:
    problem.check(graph)
    if policies is None:
        policies = build_policies(graph, problem)
    x_goal = _goal_x(graph, problem, policies)
    drrt = config.mode is Mode.DRRT_STAR and config.rewire_cycle
    rule = config.expansion_rule
    freeze = config.freeze_any_goal
    ptc = config.ptc
    goal_sets = problem.goal_sets
    goal_robots = [(i, goal_sets[i]) for i in problem.goal_robots]
    trace = [] if config.record_trace else None
    memo: dict = {}
    rng = _Draws(config.seed)
    lower, upper = graph.lower, graph.upper

    def is_goal(v):
        for i, g in goal_robots:
            if v[i] not in g:
                return False
        return True

    stats = PlanStats()
    tree = SearchTree(graph, problem.start)
    best = BestPath()
    t0 = time.perf_counter_ns()
    st = _PtcState(t0, stats.timeline)

    def record(i, it):
        nonlocal best
        best = BestPath(tree.path(i), tree.cost[i])
        st.best_cost = best.cost
        now = time.perf_counter_ns() - t0
        if stats.time_to_first_ns is None:
            stats.time_to_first_ns = now
            stats.iterations_to_first = it
            stats.cost_first = best.cost
        stats.timeline.append((now, it, best.cost))

    v_last: Optional[int] = 0
    if is_goal(problem.start):
        tree.goal_hits.append(0)
        record(0, 1)

    it = 0
    while True:
        st.iterations = it
        if any(t.done(st) for t in ptc):
            break
        it += 1

        if v_last is not None:
            x_rand = x_goal
            near = v_last
        else:
            x_rand = rng.uniform(lower, upper)
            near = tree.nearest_index(x_rand)
        v_near = tree.vertices[near]
        v_new = informed_any_goal_expansion(graph, problem, policies, None if v_last is None else v_near,
                                            v_near, x_rand, rng, rule, freeze)
        v_last = None
        if v_new is None or v_new == v_near:
            if trace is not None:
                trace.append((it, v_near, v_new, "noop"))
            continue

        resident = None
        if drrt:
            resident = []
            for u in graph.neighbors(v_new):
                j = tree.index.get(u)
                if j is not None:
                    resident.append((tree.cost[j] + graph.edge_cost(u, v_new), j))
            resident.sort()
            for c, j in resident:
                if graph.is_edge_valid(tree.vertices[j], v_new, memo):
                    near = j
                    v_near = tree.vertices[j]
                    break

        c_edge = graph.edge_cost(v_near, v_new)
        cost_new = tree.cost[near] + c_edge
        if cost_new > best.cost or not graph.is_edge_valid(v_near, v_new, memo):
            if trace is not None:
                trace.append((it, v_near, v_new, "invalid"))
            continue

        idx = tree.index.get(v_new)
        if idx is not None:
            if cost_new >= tree.cost[idx]:
                if trace is not None:
                    trace.append((it, v_near, v_new, "no-improvement"))
                continue
            changed = tree.reparent(idx, near, c_edge)
            if changed is None:
                if trace is not None:
                    trace.append((it, v_near, v_new, "cycle"))
                continue
            stats.rewires += 1
            event = "rewire"
        else:
            idx = tree.add(v_new, near, c_edge)
            if is_goal(v_new):
                tree.goal_hits.append(idx)
            changed = [idx]
            event = "add"

        if drrt:
            for _, j in resident:
                if j == tree.parent[idx] or j == idx:
                    continue
                u = tree.vertices[j]
                c = graph.edge_cost(v_new, u)
                if tree.cost[idx] + c < tree.cost[j] and graph.is_edge_valid(v_new, u, memo):
                    sub = tree.reparent(j, idx, c)
                    if sub is not None:
                        stats.rewires += 1
                        changed.extend(sub)

        # incremental UpdatePath: only re-costed vertices can beat the current best
        cand = -1
        cand_cost = best.cost
        for k in changed:
            c = tree.cost[k]
            if (c < cand_cost or (cand >= 0 and c == cand_cost and k < cand)) and is_goal(tree.vertices[k]):
                cand, cand_cost = k, c
        if cand >= 0:
            record(cand, it)

        if trace is not None:
            trace.append((it, v_near, v_new, event))
        v_last = idx
        if config.debug_checks:
            tree.check()
            if update_path(tree, BestPath(list(best.path), best.cost), problem).cost != best.cost:
                raise TreeInvariantError("incremental path update diverged from a full scan")

    stats.iterations = it
    stats.tree_size = len(tree)
    stats.elapsed_ns = time.perf_counter_ns() - t0
    return PlanResult(best.path, best.cost, stats, trace)


def plan(graph: ImplicitGraph, problem: ProblemSpec, config: PlannerConfig, policies=None) -> PlanResult:
    """Fast-dRRT* (or the baseline when ``config.mode`` says so)."""
    return _run(graph, problem, config, policies)


def plan_drrt_star(graph: ImplicitGraph, problem: ProblemSpec, config: PlannerConfig, policies=None) -> PlanResult:
    cfg = PlannerConfig(**{**config.__dict__, "mode": Mode.DRRT_STAR})
    return _run(graph, problem, cfg, policies)


def validate_path(graph: ImplicitGraph, problem: ProblemSpec, path, cost: float, tol: float = 1e-9) -> list:
    """Post-hoc path audit; returns a list of violations (empty if the path is sound)."""
    issues = []
    if not path:
        return ["empty path"]
    if tuple(path[0]) != problem.start:
        issues.append("path does not begin at the start vertex")
    if not goal_satisfied(problem, path[-1]):
        issues.append("path does not end in the goal region")
    total = 0.0
    for k, (v, w) in enumerate(zip(path[:-1], path[1:])):
        if not graph.is_neighbor(v, w):
            issues.append(f"step {k}: {v} -> {w} is not a composite edge")
            continue
        if not graph.is_edge_valid(v, w):
            issues.append(f"step {k}: {v} -> {w} fails swept-volume validity")
        total += graph.edge_cost(v, w)
    if abs(total - cost) > tol:
        issues.append(f"summed edge cost {total} != reported {cost}")
    return issues


__all__ = [
    "ANY", "Mode", "ExpansionRule", "ProblemSpec", "ProblemError", "PlannerConfig", "PlanStats", "PlanResult",
    "BestPath", "SearchTree", "TreeInvariantError", "MaxIterations", "TimeLimit", "FirstSolution",
    "CostConvergence", "CostThreshold", "AllOf", "goal_satisfied", "build_policies",
    "informed_any_goal_expansion", "update_path", "rewire", "plan", "plan_drrt_star", "validate_path",
]
