import math

import numpy as np
import pytest

from conftest import abstract_graph, two_link
from fastdrrt.oracle import (ProductGraphTooLarge, build_explicit, composite_edge_exact_valid, exact_swept_overlap,
                             optimal_cost)
from test_composite import lattice


def test_lattice_enumeration():
    ex = build_explicit(lattice())
    assert ex.n_vertices == 4 and ex.n_edges == 3
    cost, path = optimal_cost(ex, (0, 0), lambda v: v == (1, 1))
    assert cost == pytest.approx(1.5)
    assert path == [(0, 0), (1, 0), (1, 1)]
    free = build_explicit(lattice(), check_validity=False)
    assert free.n_edges == 6
    assert optimal_cost(free, (0, 0), lambda v: v == (1, 1))[0] == pytest.approx(math.hypot(0.5, 1.0))


def test_cap_and_unreachable():
    with pytest.raises(ProductGraphTooLarge):
        build_explicit(lattice(), cap=3)
    ex = build_explicit(lattice())
    ex.adjacency = [[] for _ in ex.vertices]
    assert optimal_cost(ex, (0, 0), lambda v: v == (1, 1)) == (math.inf, [])


def test_explicit_edges_match_implicit(rng):
    g = abstract_graph(rng, n_robots=3, n_nodes=3, density=0.1)
    ex = build_explicit(g)
    edges = ex.edge_set()
    for v in ex.vertices:
        for w in g.neighbors(v):
            assert ((v, w) in edges) == g.is_edge_valid(v, w)


def test_optimal_cost_agrees_with_scipy(rng):
    from scipy.sparse import lil_matrix
    from scipy.sparse.csgraph import dijkstra

    for _ in range(5):
        g = abstract_graph(rng, n_robots=2, n_nodes=5)
        ex = build_explicit(g)
        m = lil_matrix((ex.n_vertices,) * 2)
        for a, nbrs in enumerate(ex.adjacency):
            for b, c in nbrs:
                m[a, b] = c
        ref = dijkstra(m.tocsr(), indices=ex.index[(0, 0)])
        goal = (4, 4)
        assert optimal_cost(ex, (0, 0), lambda v: v == goal)[0] == pytest.approx(ref[ex.index[goal]])


def test_exact_swept_overlap_basic():
    r0 = two_link((0, 0), (0.5, 0.4), 0.05)
    q0 = np.array([0.0, 0.0])
    far = two_link((2.0, 0), (0.5, 0.4), 0.05)
    pi = np.array([np.pi, 0.0])
    assert not exact_swept_overlap(r0, (q0, q0), far, (pi, pi), 0.01)
    # the hovering arm touches the static one only halfway through its swing
    hover = two_link((0.6, 0.95), (0.5, 0.4), 0.05)
    qa, qb = np.array([0.0, 0.0]), np.array([-np.pi, 0.0])
    assert not exact_swept_overlap(r0, (q0, q0), hover, (qa, qa), 0.01)
    assert not exact_swept_overlap(r0, (q0, q0), hover, (qb, qb), 0.01)
    assert exact_swept_overlap(r0, (q0, q0), hover, (qa, qb), 0.01)
    assert exact_swept_overlap(hover, (qa, qb), r0, (q0, q0), 0.01)
    assert not exact_swept_overlap(r0, (q0, q0), hover, (qa, qb), 4.0)  # endpoints only


def test_composite_exact_matches_pairwise(corridor):
    g = corridor.graph
    step = corridor.annotations[0].delta / 2
    v = corridor.problem(0).start
    for w in list(g.neighbors(v))[:10]:
        exact = composite_edge_exact_valid(g, v, w, step)
        motions = [(rm.nodes[a], rm.nodes[b]) for rm, a, b in zip(g.roadmaps, v, w)]
        ref = not exact_swept_overlap(g.robots[0], motions[0], g.robots[1], motions[1], step)
        assert exact == ref
        if not exact:
            assert not g.is_edge_valid(v, w)  # voxel test is conservative


def test_start_is_goal_and_symmetry():
    ex = build_explicit(lattice())
    assert optimal_cost(ex, (1, 1), lambda v: v == (1, 1)) == (0.0, [(1, 1)])
    edges = ex.edge_set()
    assert all((w, v) in edges for v, w in edges)


def test_single_mover_reduces_to_roadmap_dijkstra(rng):
    from fastdrrt.composite import ImplicitGraph
    from fastdrrt.roadmap import Roadmap, next_hop_policy
    from fastdrrt.sweptvol import AnnotatedRoadmap

    g = abstract_graph(rng, n_robots=2, n_nodes=6, density=0.0)
    # second robot collapsed to a single node: the product is the first roadmap
    still = Roadmap(np.zeros((1, 2)), np.zeros((0, 2), int), [0])
    a1 = AnnotatedRoadmap(still, g.grid, [np.zeros(0, np.int64)], [], 0.01)
    g1 = ImplicitGraph(g.robots, [g.annotations[0], a1])
    ex = build_explicit(g1)
    ref = next_hop_policy(g.roadmaps[0], {5}).cost_to_goal
    for n in range(6):
        assert optimal_cost(ex, (n, 0), lambda v: v[0] == 5)[0] == pytest.approx(ref[n])


def test_disconnected_roadmap_pair_unreachable():
    from fastdrrt.composite import ImplicitGraph
    from fastdrrt.roadmap import Roadmap
    from fastdrrt.sweptvol import AnnotatedRoadmap

    g0 = lattice()
    r = Roadmap(np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]), [(0, 1)], [0])
    a = AnnotatedRoadmap(r, g0.grid, [np.array([70 + k], np.int64) for k in range(3)],
                         [np.array([70, 71], np.int64)], 0.01)
    ex = build_explicit(ImplicitGraph(g0.robots, [g0.annotations[0], a]))
    for target in ((0, 2), (1, 2)):
        assert optimal_cost(ex, (0, 0), lambda v: v == target)[0] == math.inf


def test_optimum_independent_of_enumeration_order(rng):
    g = abstract_graph(rng, n_robots=2, n_nodes=5)
    ex = build_explicit(g)
    base = optimal_cost(ex, (0, 0), lambda v: v == (4, 4))[0]
    perm = rng.permutation(ex.n_vertices)
    inv = np.argsort(perm)
    ex.vertices = [ex.vertices[k] for k in perm]
    ex.index = {v: k for k, v in enumerate(ex.vertices)}
    ex.adjacency = [[(int(inv[j]), c) for j, c in ex.adjacency[k]] for k in perm]
    assert optimal_cost(ex, (0, 0), lambda v: v == (4, 4))[0] == pytest.approx(base, abs=1e-12)


def test_static_arm_in_sweep_corridor_confirmed_finely():
    r0 = two_link((0, 0), (0.5, 0.4), 0.05)
    hover = two_link((0.6, 0.95), (0.5, 0.4), 0.05)
    q0 = np.array([-np.pi / 2, 0.0])
    swing = (np.array([np.pi / 2, 0.0]), np.array([-0.2, 0.0]))
    for step in (0.05, 0.005):
        assert exact_swept_overlap(hover, (q0, q0), r0, swing, step)
