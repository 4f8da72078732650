import numpy as np
import pytest

from lcqp2d.contact import (
    balance_residual,
    complementarity_rows,
    distance_jacobian,
    evaluate_all,
    evaluate_candidate,
    linearize_balance,
    relax_rows,
    signed_distance,
    tangential_velocity,
)


def _fd_gradient(f, q, h=1e-6):
    out = np.zeros_like(q)
    for j in range(len(q)):
        e = np.zeros_like(q)
        e[j] = h
        out[j] = (f(q + e) - f(q - e)) / (2 * h)
    return out


# ---------------------------------------------------------------------------
# Jacobian sweeps against central finite differences


def test_distance_jacobians_match_finite_differences(mixed_world):
    w = mixed_world
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        q = w.q0() + rng.normal(scale=0.05, size=w.n_q)
        for cand in w.candidates:
            jac = distance_jacobian(w, cand, q)
            fd = _fd_gradient(lambda qq: signed_distance(w, cand, qq)[0], q)
            scale = max(np.max(np.abs(fd)), 1e-8)
            worst = max(worst, np.max(np.abs(jac - fd)) / scale)
    assert worst <= 1e-5


def test_tangential_velocity_linear_in_v(mixed_world):
    w = mixed_world
    rng = np.random.default_rng(11)
    for _ in range(50):
        q = w.q0() + rng.normal(scale=0.05, size=w.n_q)
        v = rng.normal(size=w.n_q)
        for cand in w.candidates:
            psi, jac = tangential_velocity(w, cand, q, v)
            assert psi == pytest.approx(float(jac @ v), abs=1e-12)
            psi0, _ = tangential_velocity(w, cand, q, np.zeros(w.n_q))
            assert psi0 == 0.0


def test_tangential_velocity_matches_position_difference(mixed_world):
    """For box corners, psi equals the rate of the contact point's tangent
    coordinate along the motion."""
    w = mixed_world
    rng = np.random.default_rng(13)
    h = 1e-6
    for _ in range(25):
        q = w.q0() + rng.normal(scale=0.05, size=w.n_q)
        v = rng.normal(size=w.n_q)
        for cand in w.candidates:
            if cand.point_local is None:
                continue        # a disk's slip includes spin, not captured by the coordinate
            psi, _ = tangential_velocity(w, cand, q, v)
            g0 = evaluate_candidate(w, cand, q - h * v)
            g1 = evaluate_candidate(w, cand, q + h * v)
            fd = (g1.tangent_coord - g0.tangent_coord) / (2 * h)
            assert psi == pytest.approx(fd, abs=1e-5 * max(1.0, abs(fd)))


def test_pure_sliding_point_psi(resting_box_world):
    w = resting_box_world
    q = w.q0()
    v = np.zeros(w.n_q)
    v[w.cols(w.body("box")).start] = 1.0        # box slides +x on the ground
    psi, _ = tangential_velocity(w, w.candidates[2], q, v)
    assert psi == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Balance


def test_balance_residual_free_unforced_body(mixed_world):
    w = mixed_world
    body = w.body("box")
    forces = np.zeros((len(w.candidates), 3))
    res = balance_residual(w, body, w.q0(), forces)
    res[1] += body.mass * w.gravity       # cancel gravity
    assert np.allclose(res, 0.0, atol=1e-12)


def test_balance_residual_symmetric_rest(resting_box_world):
    w = resting_box_world
    box = w.body("box")
    mg = box.mass * w.gravity
    forces = np.zeros((5, 3))
    forces[2, 2] = mg / 2               # the two bottom corners
    forces[3, 2] = mg / 2
    res = balance_residual(w, box, w.q0(), forces)
    assert np.allclose(res, 0.0, atol=1e-12)


def test_balance_residual_linear_in_forces(resting_box_world):
    w = resting_box_world
    box = w.body("box")
    mg = box.mass * w.gravity
    forces = np.zeros((5, 3))
    forces[2, 2] = mg / 2
    forces[3, 2] = mg / 2 + 1.0         # one normal bumped by +1
    res = balance_residual(w, box, w.q0(), forces)
    g = evaluate_all(w, w.q0())[3]
    arm = g.frame.point - w.com_world(box, w.q0())
    assert res[0] == pytest.approx(0.0, abs=1e-12)
    assert res[1] == pytest.approx(1.0, abs=1e-12)
    assert res[2] == pytest.approx(arm[0] * 1.0, abs=1e-12)


def test_balance_linearization_matches_finite_differences(mixed_world):
    w = mixed_world
    rng = np.random.default_rng(5)
    for trial in range(20):
        q = w.q0() + rng.normal(scale=0.04, size=w.n_q)
        forces = rng.uniform(0.0, 2.0, size=(len(w.candidates), 3))
        for body in (w.body("box"), w.body("disk")):
            blk = linearize_balance(w, body, q, forces)
            assert np.allclose(blk.residual, balance_residual(w, body, q, forces))
            fd = np.zeros_like(blk.d_dq)
            h = 1e-6
            for j in range(w.n_q):
                e = np.zeros(w.n_q)
                e[j] = h
                fd[:, j] = (balance_residual(w, body, q + e, forces)
                            - balance_residual(w, body, q - e, forces)) / (2 * h)
            scale = max(1.0, np.max(np.abs(fd)))
            assert np.max(np.abs(blk.d_dq - fd)) / scale <= 1e-5


def test_balance_dlambda_structure(resting_box_world):
    """Force columns map the tangential split and the normal through the
    frame rotation; moment row applies the perpendicular arm."""
    w = resting_box_world
    box = w.body("box")
    blk = linearize_balance(w, box, w.q0(), np.zeros((5, 3)))
    g = evaluate_all(w, w.q0())[2]
    arm = g.frame.point - w.com_world(box, w.q0())
    D = blk.d_dlambda[2]
    t, n = g.frame.tangent, g.frame.normal
    assert np.allclose(D[:2, 0], t) and np.allclose(D[:2, 1], -t)
    assert np.allclose(D[:2, 2], n)
    assert D[2, 2] == pytest.approx(arm[0] * n[1] - arm[1] * n[0])


def test_action_reaction_cancels(mixed_world):
    """A candidate between two movable bodies contributes opposite wrench
    force blocks to the two balances."""
    w = mixed_world
    rng = np.random.default_rng(9)
    q = w.q0() + rng.normal(scale=0.02, size=w.n_q)
    cand = w.candidates[8]          # gripper tip on box face
    forces = np.zeros((len(w.candidates), 3))
    forces[8] = (0.3, 0.1, 2.0)
    box_res = balance_residual(w, w.body("box"), q, forces)
    box_res[1] += w.body("box").mass * w.gravity
    g = evaluate_all(w, q)[8]
    F_on_point_body = g.frame.rotation @ np.array([0.3 - 0.1, 2.0])
    # the box is the surface body: it receives the opposite force
    assert np.allclose(box_res[:2], -F_on_point_body, atol=1e-12)


# ---------------------------------------------------------------------------
# Complementarity rows


def _row_value(expr, dq, dlam, slip, slack):
    return (float(expr.dq @ dq) + float(expr.dlam @ dlam)
            + expr.slip * slip + expr.slack * slack + expr.const)


def test_complementarity_rows_separated_contact(mixed_world):
    w = mixed_world
    q = w.q0()
    g = evaluate_candidate(w, w.candidates[0], q)
    force = np.zeros(3)
    rows = complementarity_rows(g, force)
    dq = np.zeros(w.n_q)
    # normal pair: (lambda_n + dlam_n, phi + grad phi . dq)
    left = _row_value(rows[0].left, dq, np.array([0, 0, 0.5]), 0.0, 0.0)
    right = _row_value(rows[0].right, dq, np.zeros(3), 0.0, 0.0)
    assert left == pytest.approx(0.5)
    assert right == pytest.approx(g.phi)


def test_complementarity_cone_row_at_boundary(mixed_world):
    w = mixed_world
    g = evaluate_candidate(w, w.candidates[0], w.q0())
    mu = g.candidate.mu
    force = np.array([5.0, 0.0, 10.0])
    rows = complementarity_rows(g, force)
    # right side of the cone pair: mu (lambda_n + dn) - sum of tangentials
    val = _row_value(rows[3].right, np.zeros(w.n_q), np.array([0.0, 0.0, 1.0]), 0.0, 0.0)
    assert val == pytest.approx(mu * (10.0 + 1.0) - 5.0)
    dlam = np.array([1.0, 1.0, 0.0])
    val2 = _row_value(rows[3].right, np.zeros(w.n_q), dlam, 0.0, 0.0)
    assert val2 == pytest.approx(mu * 10.0 - 5.0 - 2.0)


def test_relax_rows_adds_shared_slack(mixed_world):
    w = mixed_world
    g = evaluate_candidate(w, w.candidates[0], w.q0())
    rows = complementarity_rows(g, np.zeros(3))
    relaxed = relax_rows(rows)
    for strict, soft in zip(rows, relaxed):
        assert strict.left.slack == 0.0 and strict.right.slack == 0.0
        assert soft.left.slack == 1.0 and soft.right.slack == 1.0
        # slack at zero reduces to the strict rows
        v_strict = _row_value(strict.right, np.zeros(w.n_q), np.zeros(3), 0.0, 0.0)
        v_soft = _row_value(soft.right, np.zeros(w.n_q), np.zeros(3), 0.0, 0.0)
        assert v_strict == pytest.approx(v_soft)


def test_relaxation_recovers_measured_penetration(mixed_world):
    """With measured penetration and zero force, the strict normal pair is
    infeasible at dq = 0 while the relaxed one admits s >= penetration."""
    w = mixed_world
    q = w.q0()
    sl = w.cols(w.body("box"))
    q2 = q.copy()
    q2[sl.start + 1] -= 1e-4          # push the box into the ground
    g = evaluate_candidate(w, w.candidates[2], q2)
    assert g.phi < 0
    rows = complementarity_rows(g, np.zeros(3))
    right_strict = _row_value(rows[0].right, np.zeros(w.n_q), np.zeros(3), 0.0, 0.0)
    assert right_strict < 0           # infeasible as an inequality
    soft = relax_rows(rows)
    right_soft = _row_value(soft[0].right, np.zeros(w.n_q), np.zeros(3), 0.0, -g.phi)
    assert right_soft == pytest.approx(0.0, abs=1e-15)
