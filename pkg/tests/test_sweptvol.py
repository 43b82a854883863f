import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import two_link
from fastdrrt.geom import Capsule, forward_kinematics, interpolate, link_segments_batch
from fastdrrt.roadmap import Roadmap
from fastdrrt.sweptvol import (GridMismatchError, OutOfGridError, VoxelGrid, annotate_roadmap, default_delta,
                               grid_covering, is_voxelset, load_volumes, read_grid_header, save_volumes,
                               voxelize_capsules, voxelize_config, voxelize_edge, voxelize_segments,
                               voxelsets_intersect)

GRID = VoxelGrid((-2.0, -2.0), 0.05, (80, 80))
ints = st.lists(st.integers(0, 500), max_size=40).map(lambda x: np.array(sorted(set(x)), dtype=np.int64))


def _cell_centers(grid):
    ix, iy = np.meshgrid(np.arange(grid.dims[0]), np.arange(grid.dims[1]), indexing="ij")
    return np.stack([grid.origin[0] + (ix.ravel() + 0.5) * grid.d_voxel,
                     grid.origin[1] + (iy.ravel() + 0.5) * grid.d_voxel], -1)


def _brute(grid, a, b, r):
    """Reference: distance from every cell center to the segment, densely sampled."""
    t = np.linspace(0, 1, 4001)[:, None]
    pts = np.asarray(a) + t * (np.asarray(b) - np.asarray(a))
    c = _cell_centers(grid)
    d = np.min(np.linalg.norm(c[:, None] - pts[None], axis=-1), axis=1)
    return d


def test_grid_cell_indexing():
    g = VoxelGrid((0.0, 0.0), 0.5, (4, 3))
    assert g.n_cells == 12
    assert g.cell_of((0.1, 0.1)) == 0
    assert g.cell_of((0.6, 0.1)) == 3  # row-major, y fastest
    assert np.allclose(g.cell_center(4), [0.75, 0.75])
    with pytest.raises(OutOfGridError):
        g.cell_of((2.1, 0.0))


def test_grid_covering_covers_reach():
    r1, r2 = two_link((0, 0)), two_link((1.5, 0.3))
    g = grid_covering([r1, r2], 0.07)
    assert g.covers((-2.1, -2.1), (3.6, 2.4))


def test_single_cell_capsule():
    g = VoxelGrid((0.0, 0.0), 1.0, (5, 5))
    v = voxelize_segments(g, [2.5, 2.5], [2.5, 2.5], 0.01)  # zero-length axis at a cell center
    # reach 0.01 + 0.707 covers only the own center (neighbours are 1.0 away)
    assert list(v) == [g.cell_of((2.5, 2.5))]


def test_voxelization_matches_inclusion_rule(rng):
    g = VoxelGrid((-1.0, -1.0), 0.1, (20, 20))
    for _ in range(10):
        a, b = rng.uniform(-0.6, 0.6, (2, 2))
        r = rng.uniform(0.01, 0.2)
        v = set(voxelize_segments(g, a, b, r).tolist())
        d = _brute(g, a, b, r)
        reach = r + g.d_voxel * math.sqrt(2) / 2
        sure_in = set(np.flatnonzero(d <= reach - 1e-3).tolist())
        sure_out = set(np.flatnonzero(d > reach + 1e-3).tolist())
        assert sure_in <= v
        assert not (v & sure_out)


def test_voxelization_covers_dense_capsule_points(rng):
    robot = two_link(lengths=(0.8, 0.6), radius=0.06)
    for _ in range(10):
        q = rng.uniform(-np.pi, np.pi, 2)
        v = set(voxelize_config(robot, q, GRID).tolist())
        for c in forward_kinematics(robot, q):
            t = rng.random(2000)
            ang = rng.uniform(0, 2 * np.pi, 2000)
            rad = c.radius * np.sqrt(rng.random(2000))
            pts = c.endpoint_a + t[:, None] * (c.endpoint_b - c.endpoint_a)
            pts += rad[:, None] * np.stack([np.cos(ang), np.sin(ang)], -1)
            assert all(GRID.cell_of(p) in v for p in pts)


def test_capsules_and_segments_agree():
    caps = [Capsule((0, 0), (0.5, 0.2), 0.05), Capsule((0.5, 0.2), (0.6, 0.9), 0.05)]
    direct = np.unique(np.concatenate([voxelize_segments(GRID, c.endpoint_a, c.endpoint_b, 0.05) for c in caps]))
    assert np.array_equal(voxelize_capsules(GRID, caps), direct)


def test_out_of_grid():
    with pytest.raises(OutOfGridError):
        voxelize_segments(GRID, [1.9, 0.0], [2.5, 0.0], 0.05)


def test_default_delta_bounds_displacement(rng):
    robot = two_link(lengths=(0.8, 0.6, ), radius=0.05)
    d = default_delta(robot, 0.05)
    assert d == pytest.approx(0.5 * 0.05 / math.hypot(1.4, 0.6))
    for _ in range(200):
        q = rng.uniform(-np.pi, np.pi, 2)
        dq = rng.normal(size=2)
        dq *= d / np.linalg.norm(dq)
        A0, B0 = link_segments_batch(robot, q[None])
        A1, B1 = link_segments_batch(robot, (q + dq)[None])
        assert np.max(np.linalg.norm(B1 - B0, axis=-1)) <= 0.025 + 1e-12


def test_edge_volume_contains_endpoint_and_midway_volumes(rng):
    robot = two_link(lengths=(0.8, 0.6), radius=0.05)
    delta = default_delta(robot, GRID.d_voxel)
    for _ in range(5):
        qa, qb = rng.uniform(-1, 1, (2, 2))
        ve = set(voxelize_edge(robot, qa, qb, GRID, delta).tolist())
        for q in interpolate(qa, qb, delta / 3):
            # every intermediate configuration lies within half a cell of a sample
            for c in forward_kinematics(robot, q):
                for p in (c.endpoint_a, c.endpoint_b, (c.endpoint_a + c.endpoint_b) / 2):
                    assert GRID.cell_of(p) in ve


@given(ints, ints)
def test_intersection_matches_set_semantics(a, b):
    assert voxelsets_intersect(a, b) == bool(set(a.tolist()) & set(b.tolist()))
    assert voxelsets_intersect(a, b) == voxelsets_intersect(b, a)


def test_is_voxelset():
    assert is_voxelset(np.array([1, 5, 9]))
    assert not is_voxelset(np.array([1, 1]))
    assert not is_voxelset(np.array([-1, 2]))
    assert not is_voxelset(np.array([1, 99]), VoxelGrid((0, 0), 1.0, (5, 5)))


def _small_annotation():
    robot = two_link(lengths=(0.8, 0.6), radius=0.05)
    rm = Roadmap(np.array([[0, 0], [0.5, 0.2], [1.0, -0.3]]), [(0, 1), (1, 2)], [0, 2])
    return robot, rm, annotate_roadmap(robot, rm, GRID, 0.02)


def test_annotation_roundtrip(tmp_path):
    robot, rm, ann = _small_annotation()
    save_volumes(tmp_path / "v.bin", ann)
    assert read_grid_header(tmp_path / "v.bin") == GRID
    back = load_volumes(tmp_path / "v.bin", rm, GRID)
    assert back.delta == 0.02
    for x, y in zip(ann.node_volumes + ann.edge_volumes, back.node_volumes + back.edge_volumes):
        assert np.array_equal(x, y) and is_voxelset(x, GRID)
    assert np.array_equal(back.edge_volume(2, 1), ann.edge_volumes[1])


def test_annotation_grid_mismatch(tmp_path):
    robot, rm, ann = _small_annotation()
    save_volumes(tmp_path / "v.bin", ann)
    with pytest.raises(GridMismatchError):
        load_volumes(tmp_path / "v.bin", rm, VoxelGrid((-2.0, -2.0), 0.1, (40, 40)))
    other = Roadmap(rm.nodes, [(0, 1)], [0])
    with pytest.raises(ValueError):
        load_volumes(tmp_path / "v.bin", other)


def test_annotation_rejects_small_grid():
    robot = two_link(lengths=(0.8, 0.6), radius=0.05)
    rm = Roadmap(np.zeros((1, 2)), np.zeros((0, 2), int), [0])
    with pytest.raises(OutOfGridError):
        annotate_roadmap(robot, rm, VoxelGrid((-1, -1), 0.05, (40, 40)), 0.02)


def test_reachable_box():
    from fastdrrt.geom import RobotModel
    from fastdrrt.sweptvol import reachable_bounding_box

    lo, hi = reachable_bounding_box(two_link((0, 0), (1, 1), 0.1))
    assert np.allclose(lo, [-2.1, -2.1]) and np.allclose(hi, [2.1, 2.1])
    lo, hi = reachable_bounding_box(RobotModel((1, 2), (0.7,), 0.05, [[-1, 1]]))
    assert np.allclose(hi - [1, 2], 0.75) and np.allclose([1, 2] - lo, 0.75)


def test_reachable_box_contains_sampled_capsules(rng):
    from fastdrrt.geom import RobotModel
    from fastdrrt.sweptvol import reachable_bounding_box

    robot = RobotModel((0.3, -0.2), (0.5, 0.4, 0.3), 0.05, [[-np.pi, np.pi]] * 3)
    lo, hi = reachable_bounding_box(robot)
    A, B = link_segments_batch(robot, rng.uniform(-np.pi, np.pi, (10_000, 3)))
    for P in (A, B):
        assert np.all(P - robot.link_radius >= lo - 1e-12) and np.all(P + robot.link_radius <= hi + 1e-12)


def test_zero_length_link_at_cell_center():
    g = VoxelGrid((0.0, 0.0), 1.0, (7, 7))
    p = g.cell_center(g.cell_of((3.5, 3.5)))
    v = voxelize_segments(g, p, p, 0.01)
    c = _cell_centers(g)
    expect = np.flatnonzero(np.linalg.norm(c - p, axis=1) <= 0.01 + math.sqrt(2) / 2)
    assert np.array_equal(v, expect)


def test_edge_volume_properties(rng):
    robot = two_link(lengths=(0.8, 0.6), radius=0.05)
    delta = default_delta(robot, GRID.d_voxel)
    for _ in range(5):
        qa, qb = rng.uniform(-1, 1, (2, 2))
        assert np.array_equal(voxelize_edge(robot, qa, qa, GRID, delta), voxelize_config(robot, qa, GRID))
        ve = voxelize_edge(robot, qa, qb, GRID, delta)
        assert is_voxelset(ve, GRID)
        ends = np.union1d(voxelize_config(robot, qa, GRID), voxelize_config(robot, qb, GRID))
        assert set(ends.tolist()) <= set(ve.tolist())
        fine = voxelize_edge(robot, qa, qb, GRID, delta / 2)
        assert set(ve.tolist()) <= set(fine.tolist())


def test_intersection_small_and_large(rng):
    a = np.array([5, 9], np.int64)
    assert voxelsets_intersect(a, np.array([9, 12], np.int64))
    assert not voxelsets_intersect(np.zeros(0, np.int64), a)
    for _ in range(20):
        x = np.unique(rng.integers(0, 10**7, 10_000))
        y = np.unique(rng.integers(0, 10**7, 10_000))
        assert voxelsets_intersect(x, y) == bool(set(x.tolist()) & set(y.tolist()))
        assert voxelsets_intersect(x, np.union1d(y, x[:1]))


def test_annotation_small_roadmaps_and_determinism():
    robot = two_link(lengths=(0.8, 0.6), radius=0.05)
    one = annotate_roadmap(robot, Roadmap(np.zeros((1, 2)), np.zeros((0, 2), int), [0]), GRID, 0.02)
    assert len(one.node_volumes) == 1 and one.edge_volumes == []
    rm = Roadmap(np.array([[0.0, 0.0], [0.9, -0.5]]), [(0, 1)], [0, 1])
    a = annotate_roadmap(robot, rm, GRID, 0.02)
    b = annotate_roadmap(robot, rm, GRID, 0.02)
    e = set(a.edge_volumes[0].tolist())
    assert set(a.node_volumes[0].tolist()) <= e and set(a.node_volumes[1].tolist()) <= e
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.node_volumes + a.edge_volumes,
                                                        b.node_volumes + b.edge_volumes))
