import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcqp2d.geometry import (
    BoxShape,
    DiskShape,
    HalfPlaneShape,
    Pose2,
    Surface,
    rot,
    drot,
    tangent_of,
    world_point,
    wrap_angle,
)
from lcqp2d.contact import evaluate_candidate, signed_distance, distance_jacobian


def test_world_point_identity():
    assert np.allclose(world_point(Pose2(0, 0, 0), (1, 2)), (1, 2))


def test_world_point_quarter_turn():
    p = world_point(Pose2(0, 0, math.pi / 2), (1, 0))
    assert np.allclose(p, (0, 1), atol=1e-15)


def test_world_point_general_matches_hand_rolled_trig():
    pose = Pose2(0.3, 0.1, math.pi / 6)
    local = np.array([0.1, 0.05])
    c, s = math.cos(math.pi / 6), math.sin(math.pi / 6)
    expected = np.array([0.3 + c * 0.1 - s * 0.05, 0.1 + s * 0.1 + c * 0.05])
    assert np.allclose(world_point(pose, local), expected, atol=1e-15)


def test_rotation_derivative_matches_finite_difference():
    h = 1e-7
    for theta in (0.0, 0.4, -2.2, 9.0):
        fd = (rot(theta + h) - rot(theta - h)) / (2 * h)
        assert np.allclose(drot(theta), fd, atol=1e-6)


def test_tangent_right_handed():
    for n in ((0.0, 1.0), (1.0, 0.0), (0.6, 0.8)):
        t = tangent_of(n)
        assert abs(np.dot(t, n)) < 1e-15
        assert np.isclose(t[0] * n[1] - t[1] * n[0], 1.0)


@given(st.floats(-50, 50))
def test_wrap_angle_range(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert abs(math.remainder(w - a, 2 * math.pi)) < 1e-9


def test_box_shape_validation():
    with pytest.raises(ValueError):
        BoxShape(0.0, 1.0)
    with pytest.raises(ValueError):
        DiskShape(-1.0)
    with pytest.raises(ValueError):
        HalfPlaneShape((1, 1), 0.0)
    with pytest.raises(ValueError):
        Surface(normal=(2, 0), offset=0.0)


def test_box_corners_on_boundary():
    box = BoxShape(0.3, 0.5)
    for c in box.corners():
        assert abs(abs(c[0]) - 0.15) < 1e-15 or abs(abs(c[1]) - 0.25) < 1e-15


def test_box_face_windows():
    box = BoxShape(0.2, 0.4)
    f = box.face("+x")
    assert np.allclose(f.normal_vec(), (1, 0))
    assert f.offset == pytest.approx(0.1)
    assert f.t_lo == pytest.approx(-0.2) and f.t_hi == pytest.approx(0.2)
    with pytest.raises(ValueError):
        box.face("up")


# ---------------------------------------------------------------------------
# Signed distances (candidate-level; world fixtures from conftest)


def test_signed_distance_point_above_ground(mixed_world):
    w = mixed_world
    q = w.q0()
    # place the disk center 2.05 above ground: gap of the disk candidate
    q[w.cols(w.body("disk"))] = (0.0, 2.05, 0.0)
    cand = w.candidates[-1]
    phi, frame = signed_distance(w, cand, q)
    assert phi == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(frame.normal, (0, 1))
    assert np.allclose(frame.rotation.T @ frame.rotation, np.eye(2), atol=1e-12)


def test_signed_distance_touching_is_zero(resting_box_world):
    w = resting_box_world
    q = w.q0()
    phi, _ = signed_distance(w, w.candidates[2], q)   # a bottom corner
    assert phi == pytest.approx(0.0, abs=1e-12)


def test_signed_distance_rotated_corner_vs_wall(mixed_world):
    w = mixed_world
    q = w.q0()
    # corner 0 of the box against the wall x = 0.3, worked out by hand
    box = w.body("box")
    cand = w.candidates[1]          # corner 0 vs wall
    corner = box.shape.corners()[0]
    pose = w.pose(box, q)
    world = pose.to_world(corner)
    expected = 0.3 - world[0]
    phi, _ = signed_distance(w, cand, q)
    assert phi == pytest.approx(expected, abs=1e-12)


def test_penetration_is_legal(resting_box_world):
    w = resting_box_world
    q = w.q0()
    q[w.cols(w.body("box")).start + 1] -= 0.01
    phi, _ = signed_distance(w, w.candidates[2], q)
    assert phi == pytest.approx(-0.01, abs=1e-12)


def test_distance_jacobian_free_point_above_ground(mixed_world):
    w = mixed_world
    cand = w.candidates[-1]           # disk on ground
    jac = distance_jacobian(w, cand, w.q0())
    cols = w.cols(w.body("disk"))
    expected = np.zeros(w.n_q)
    expected[cols.start + 1] = 1.0    # distance is the center height
    assert np.allclose(jac, expected, atol=1e-12)


def test_rigid_transform_invariance(mixed_world):
    """Moving both bodies of a candidate rigidly leaves phi unchanged."""
    w = mixed_world
    cand = w.candidates[8]            # gripper tip vs box face (both movable)
    rng = np.random.default_rng(3)
    for _ in range(25):
        q = w.q0() + rng.normal(scale=0.1, size=w.n_q)
        phi0, _ = signed_distance(w, cand, q)
        dx, dy, dth = rng.normal(scale=0.5, size=3)
        q2 = q.copy()
        for body in (cand.point_body, cand.surface_body):
            sl = w.cols(body)
            R = rot(dth)
            q2[sl.start:sl.start + 2] = R @ q[sl.start:sl.start + 2] + (dx, dy)
            q2[sl.start + 2] = q[sl.start + 2] + dth
        phi1, _ = signed_distance(w, cand, q2)
        assert phi1 == pytest.approx(phi0, abs=1e-10)


def test_frame_arm_perp_is_quarter_turn(mixed_world):
    w = mixed_world
    q = w.q0() + 0.01
    for cand in w.candidates:
        g = evaluate_candidate(w, cand, q)
        assert np.allclose(g.frame.arm_perp,
                           np.array([-g.frame.arm[1], g.frame.arm[0]]))
        assert np.allclose(g.frame.rotation.T @ g.frame.rotation, np.eye(2),
                           atol=1e-10)
