import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import two_link
from fastdrrt.geom import (Capsule, Disc, GeometryError, Rect, RobotModel, capsule_capsule_collide,
                           config_collides, configs_collide, forward_kinematics, interpolate, motion_collides,
                           obstacle_from_dict, segment_distance)

angles = st.floats(-np.pi, np.pi, allow_nan=False)
coords = st.floats(-2.0, 2.0, allow_nan=False)
point = st.tuples(coords, coords)


def _ends(caps):
    return [(tuple(np.round(c.endpoint_a, 12)), tuple(np.round(c.endpoint_b, 12))) for c in caps]


def test_fk_straight_chain_along_x():
    caps = forward_kinematics(two_link(), [0.0, 0.0])
    assert _ends(caps) == [((0, 0), (1, 0)), ((1, 0), (2, 0))]
    assert all(c.radius == 0.1 for c in caps)


def test_fk_quarter_turn():
    caps = forward_kinematics(two_link(), [np.pi / 2, 0.0])
    assert np.allclose(caps[0].endpoint_a, [0, 0]) and np.allclose(caps[0].endpoint_b, [0, 1])
    assert np.allclose(caps[1].endpoint_a, [0, 1]) and np.allclose(caps[1].endpoint_b, [0, 2])


def test_fk_dimension_mismatch():
    with pytest.raises(GeometryError):
        forward_kinematics(two_link(), [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        forward_kinematics(two_link(), [0.0])


def test_fk_matches_complex_rotation(rng):
    robot = RobotModel((0.3, -0.2), (0.7, 0.5, 0.4), 0.05, [[-np.pi, np.pi]] * 3)
    for _ in range(50):
        q = rng.uniform(-np.pi, np.pi, 3)
        z, rot, pts = complex(0.3, -0.2), 1 + 0j, [complex(0.3, -0.2)]
        for L, a in zip(robot.link_lengths, q):
            rot *= complex(np.cos(a), np.sin(a))
            z += L * rot
            pts.append(z)
        caps = forward_kinematics(robot, q)
        for j, c in enumerate(caps):
            assert np.allclose(c.endpoint_a, [pts[j].real, pts[j].imag], atol=1e-12)
            assert np.allclose(c.endpoint_b, [pts[j + 1].real, pts[j + 1].imag], atol=1e-12)


@given(st.lists(angles, min_size=3, max_size=3))
def test_fk_chain_shares_endpoints_and_is_deterministic(q):
    robot = RobotModel((0, 0), (0.5, 0.4, 0.3), 0.05, [[-np.pi, np.pi]] * 3)
    a, b = forward_kinematics(robot, q), forward_kinematics(robot, q)
    for c1, c2 in zip(a[:-1], a[1:]):
        assert np.array_equal(c1.endpoint_b, c2.endpoint_a)
    assert _ends(a) == _ends(b)


def test_robot_model_invariants():
    with pytest.raises(GeometryError):
        RobotModel((0, 0), (), 0.1, [])
    with pytest.raises(GeometryError):
        RobotModel((0, 0), (1.0, 0.0), 0.1, [[-1, 1], [-1, 1]])
    with pytest.raises(GeometryError):
        RobotModel((0, 0), (1.0,), 0.0, [[-1, 1]])
    with pytest.raises(GeometryError):
        RobotModel((0, 0), (1.0,), 0.1, [[1, 1]])


def test_obstacle_invariants():
    with pytest.raises(GeometryError):
        Disc((0, 0), 0.0)
    with pytest.raises(GeometryError):
        Rect((0, 0), (1, 0))
    with pytest.raises(GeometryError):
        Capsule((0, 0), (1, 0), -0.1)
    with pytest.raises(GeometryError):
        obstacle_from_dict({"type": "hexagon"})
    d = obstacle_from_dict(Disc((1, 2), 0.5).to_dict())
    assert isinstance(d, Disc) and np.allclose(d.center, [1, 2]) and d.radius == 0.5


def test_capsules_parallel_gap():
    a = Capsule((0, 0), (1, 0), 0.1)
    b = Capsule((0, 1), (1, 1), 0.1)
    assert not capsule_capsule_collide(a, b)


def test_identical_capsules_collide():
    a = Capsule((0, 0), (1, 0), 0.1)
    assert capsule_capsule_collide(a, Capsule((0, 0), (1, 0), 0.1))


def _dense_distance(a1, b1, a2, b2, n=2001):
    t = np.linspace(0, 1, n)
    p = a1 + t[:, None] * (b1 - a1)
    q = a2 + t[:, None] * (b2 - a2)
    return np.min(np.linalg.norm(p[:, None] - q[None], axis=-1))


def test_capsule_t_configuration_against_dense_sampling():
    a = Capsule((0, 0), (1, 0), 0.3)
    b = Capsule((0.5, 0.5), (0.5, 2), 0.3)
    dense = _dense_distance(a.endpoint_a, a.endpoint_b, b.endpoint_a, b.endpoint_b)
    assert abs(dense - 0.5) < 1e-3
    assert capsule_capsule_collide(a, b)


@given(point, point, point, point)
def test_segment_distance_matches_dense_sampling(p1, p2, p3, p4):
    a1, b1, a2, b2 = map(np.array, (p1, p2, p3, p4))
    d = float(segment_distance(a1, b1, a2, b2))
    dense = _dense_distance(a1, b1, a2, b2, 801)
    # dense sampling can only overestimate, by at most half a sample spacing per segment
    slack = (np.linalg.norm(b1 - a1) + np.linalg.norm(b2 - a2)) / 800
    assert d <= dense + 1e-9
    assert dense <= d + slack + 1e-9


@given(point, point, point, point, st.floats(0, 0.5), st.floats(0, 0.5))
def test_capsule_collide_symmetric(p1, p2, p3, p4, r1, r2):
    a, b = Capsule(p1, p2, r1), Capsule(p3, p4, r2)
    assert capsule_capsule_collide(a, b) == capsule_capsule_collide(b, a)


def test_config_collides_trivial_cases():
    robot = two_link()
    assert not config_collides(robot, [0.0, 0.0], [])
    assert config_collides(robot, [0.0, 0.0], [Disc((0.5, 0.0), 0.2)])
    assert config_collides(robot, [0.0, 0.0], [Rect((1.4, -0.5), (1.6, 0.5))])
    assert not config_collides(robot, [0.0, 0.0], [Rect((1.4, 0.5), (1.6, 0.9))])


def test_self_collision_of_folded_chain():
    robot = RobotModel((0, 0), (1.0, 0.15, 1.0), 0.05, [[-np.pi, np.pi]] * 3)
    assert not config_collides(robot, [0.0, 0.0, 0.0], [])
    # third link folds back over the first
    assert config_collides(robot, [0.0, 2 * np.pi / 3, 2 * np.pi / 3], [])


def _rasterized_collides(robot, q, obstacles, n=10_000):
    """Sample points on every link capsule boundary and interior axis; test membership."""
    hits = False
    caps = forward_kinematics(robot, q)
    rng = np.random.default_rng(0)
    for c in caps:
        t = rng.random(n)
        ang = rng.uniform(0, 2 * np.pi, n)
        rad = robot.link_radius * np.sqrt(rng.random(n))
        pts = c.endpoint_a + t[:, None] * (c.endpoint_b - c.endpoint_a)
        pts = pts + rad[:, None] * np.stack([np.cos(ang), np.sin(ang)], -1)
        for o in obstacles:
            if isinstance(o, Disc):
                hits |= bool(np.any(np.linalg.norm(pts - o.center, axis=1) <= o.radius))
            else:
                hits |= bool(np.any(np.all((pts >= o.min_corner) & (pts <= o.max_corner), axis=1)))
    return hits


def test_config_collides_agrees_with_rasterization(rng):
    robot = RobotModel((0, 0), (0.6, 0.5), 0.06, [[-np.pi, np.pi]] * 2)
    agree = disagree_near_contact = 0
    for _ in range(150):
        obstacles = [Disc(rng.uniform(-1, 1, 2), rng.uniform(0.05, 0.3)),
                     Rect(*np.sort(rng.uniform(-1, 1, (2, 2)), axis=0) + [[0, 0], [0.05, 0.05]])]
        q = rng.uniform(-np.pi, np.pi, 2)
        exact = config_collides(robot, q, obstacles)
        raster = _rasterized_collides(robot, q, obstacles)
        if raster:
            assert exact  # a sampled point inside an obstacle is a certain contact
        if exact == raster:
            agree += 1
        else:
            disagree_near_contact += 1
    # the only possible disagreement is a grazing contact that sampling misses
    assert agree >= 140


def test_motion_collides_basics():
    robot = two_link()
    q = np.array([0.3, -0.2])
    assert not motion_collides(robot, q, q, [], 0.01)
    obstacles = [Disc((0.0, 1.5), 0.2)]
    assert motion_collides(robot, q, q, obstacles, 0.01) == config_collides(robot, q, obstacles)
    assert not motion_collides(robot, [0, 0], [np.pi / 2, 0], [], 0.1)


def test_motion_collides_mid_swing_only():
    robot = two_link()
    obstacles = [Disc((0.0, 1.9), 0.05)]  # on the arc swept at q1 = pi/2
    qa, qb = np.array([0.0, 0.0]), np.array([np.pi, 0.0])
    assert not config_collides(robot, qa, obstacles) and not config_collides(robot, qb, obstacles)
    assert motion_collides(robot, qa, qb, obstacles, 0.05)
    assert motion_collides(robot, qa, qb, obstacles, 0.005)  # step/10 re-check agrees


@given(st.lists(angles, min_size=2, max_size=2), st.lists(angles, min_size=2, max_size=2),
       st.floats(0.01, 1.0))
def test_motion_collides_refinement_is_monotone(qa, qb, step):
    robot = two_link(lengths=(0.6, 0.5), radius=0.05)
    obstacles = [Disc((0.4, 0.4), 0.15), Rect((-0.9, -0.3), (-0.6, 0.3))]
    if motion_collides(robot, qa, qb, obstacles, step):
        assert motion_collides(robot, qa, qb, obstacles, step / 2)
        assert motion_collides(robot, qa, qb, obstacles, step / 7)


def test_empty_environment_never_collides(rng):
    robot = two_link()
    for _ in range(20):
        assert not motion_collides(robot, rng.uniform(-3, 3, 2), rng.uniform(-3, 3, 2), [], 0.05)


@given(st.lists(angles, min_size=2, max_size=2), st.lists(angles, min_size=2, max_size=2), st.floats(0.01, 2.0))
def test_interpolate_nested_and_exact_endpoints(qa, qb, step):
    coarse = interpolate(qa, qb, step)
    fine = interpolate(qa, qb, step / 2)
    assert np.array_equal(coarse[0], np.asarray(qa, float)) and np.array_equal(coarse[-1], np.asarray(qb, float))
    gaps = np.linalg.norm(np.diff(coarse, axis=0), axis=1)
    assert np.all(gaps <= step + 1e-12)
    # every coarse sample is also a fine sample
    for c in coarse:
        assert np.min(np.linalg.norm(fine - c, axis=1)) < 1e-12


def test_batched_and_scalar_collision_agree(rng):
    robot = two_link(lengths=(0.6, 0.5), radius=0.05)
    obstacles = [Disc((0.4, 0.4), 0.15)]
    Q = rng.uniform(-np.pi, np.pi, (200, 2))
    batch = configs_collide(robot, Q, obstacles)
    assert list(batch) == [config_collides(robot, q, obstacles) for q in Q]
