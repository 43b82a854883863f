import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fastdrrt.bench.pipeline import prepare
from fastdrrt.bench.suite import SUITE, load_bundled
from fastdrrt.geom import RobotModel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def two_link(base=(0.0, 0.0), lengths=(1.0, 1.0), radius=0.1, limits=None):
    limits = limits if limits is not None else [[-np.pi, np.pi]] * len(lengths)
    return RobotModel(base, lengths, radius, limits)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_PREPARED = {}


def prepared_bundled(name):
    if name not in _PREPARED:
        _PREPARED[name] = prepare(load_bundled(name))
    return _PREPARED[name]


@pytest.fixture(scope="session", params=SUITE)
def suite_prepared(request):
    return prepared_bundled(request.param)


@pytest.fixture(scope="session")
def corridor():
    return prepared_bundled("deadlock_corridor")


def abstract_graph(rng, n_robots=2, n_nodes=4, n_cells=40, density=0.08):
    """Implicit graph over random roadmaps with random voxel sets (validity decoupled from geometry)."""
    from fastdrrt.composite import ImplicitGraph
    from fastdrrt.roadmap import Roadmap
    from fastdrrt.sweptvol import AnnotatedRoadmap, VoxelGrid

    grid = VoxelGrid((0.0, 0.0), 1.0, (n_cells, 1))
    robots, anns = [], []
    for _ in range(n_robots):
        nodes = rng.uniform(-1, 1, (n_nodes, 2))
        edges = {(k, k + 1) for k in range(n_nodes - 1)}
        for _ in range(n_nodes // 2):
            u, v = sorted(rng.choice(n_nodes, 2, replace=False))
            edges.add((int(u), int(v)))
        rm = Roadmap(nodes, sorted(edges), list(range(n_nodes)))

        def vox():
            return np.flatnonzero(rng.random(n_cells) < density).astype(np.int64)

        node_v = [vox() for _ in range(n_nodes)]
        # an edge sweeps at least its endpoints
        edge_v = [np.union1d(np.union1d(node_v[u], node_v[v]), vox()) for u, v in rm.edges]
        robots.append(RobotModel((0, 0), (0.5, 0.5), 0.05, [[-1, 1], [-1, 1]]))
        anns.append(AnnotatedRoadmap(rm, grid, node_v, edge_v, 0.01))
    return ImplicitGraph(robots, anns)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
