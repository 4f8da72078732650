import math

import numpy as np
import pytest

from lcqp2d.contact import Body, ContactCandidate, World, evaluate_all
from lcqp2d.controller import (
    Command,
    Controller,
    ControllerConfig,
    TaskAtom,
    TaskSpec,
    actuated_generalized_force,
    task_jacobian,
)
from lcqp2d.geometry import BoxShape, HalfPlaneShape, Pose2
from lcqp2d.sim import QuasistaticSim, SimConfig


def one_candidate_world():
    """A point finger above a ground-supported block; the finger contact is
    candidate 0 so its rows are easy to hand-check."""
    ground = Body("ground", HalfPlaneShape((0, 1), 0.0), Pose2(0, 0, 0), kind="static")
    block = Body("block", BoxShape(0.2, 0.1), Pose2(0.0, 0.05, 0.0),
                 kind="free", mass=0.5)
    finger = Body("finger", BoxShape(0.02, 0.08), Pose2(0.0, 0.2, 0.0), kind="actuated")
    corners = block.shape.corners()
    cands = [
        ContactCandidate(0, finger, block, block.shape.face("+y"),
                         np.array([0.0, -0.04]), mu=0.4),
        ContactCandidate(1, block, ground, ground.shape.surface(), corners[2], mu=0.6),
        ContactCandidate(2, block, ground, ground.shape.surface(), corners[3], mu=0.6),
    ]
    return World([ground, block, finger], cands)


def angles_task(world):
    return TaskSpec(atoms=[
        TaskAtom(kind="body_angle", body="finger", ref=0.0, weight=10.0),
        TaskAtom(kind="body_angle", body="block", ref=0.0, weight=10.0),
    ])


# ---------------------------------------------------------------------------
# Decision-vector layout and assembly


def test_decision_vector_size_nine_candidates():
    from lcqp2d.scenario import load_scenario
    scenario = load_scenario("pivot_box")
    world = scenario.build_world()
    ctrl = Controller(world, scenario.task(), scenario.controller_config())
    problem = ctrl.build_lcqp(world.q0())
    assert len(world.candidates) == 9
    assert problem.n == world.n_q + 9 * 5        # dq + 3 forces + slip + slack
    assert problem.n_pairs == 4 * 9
    ctrl_strict = Controller(world, scenario.task(),
                             scenario.controller_config(relaxed=False))
    p2 = ctrl_strict.build_lcqp(world.q0())
    assert p2.n == world.n_q + 9 * 4


def test_hand_assembled_single_candidate_rows():
    """The four pairs of the one-candidate world, written out by hand."""
    world = one_candidate_world()
    cfg = ControllerConfig(relaxed=True)
    ctrl = Controller(world, angles_task(world), cfg)
    lam_prev = np.zeros((3, 3))
    lam_prev[0] = (0.2, 0.1, 1.0)
    q = world.q0()
    problem = ctrl.build_lcqp(q, lam_prev=lam_prev)
    g = evaluate_all(world, q)[0]
    lay = ctrl.layout
    mu = 0.4
    n = problem.n

    # pair 0 (normal): left = lam_n + dlam_n + s ; right = phi + grad.dq + s
    L0, l0 = problem.L[0], problem.l[0]
    R0, r0 = problem.R[0], problem.r[0]
    assert l0 == pytest.approx(1.0)
    assert L0[lay.lam(0)][2] == pytest.approx(1.0)
    assert L0[lay.slack(0)] == pytest.approx(1.0)
    assert r0 == pytest.approx(g.phi)
    assert np.allclose(R0[lay.dq()], g.phi_jac)
    assert R0[lay.slack(0)] == pytest.approx(1.0)

    # pairs 1 and 2 (tangential split): right sides carry +/- the slip jacobian
    assert problem.l[1] == pytest.approx(0.2)
    assert problem.l[2] == pytest.approx(0.1)
    assert np.allclose(problem.R[1][lay.dq()], g.psi_jac)
    assert np.allclose(problem.R[2][lay.dq()], -g.psi_jac)
    assert problem.R[1][lay.slip(0)] == pytest.approx(1.0)
    assert problem.r[1] == pytest.approx(0.0) and problem.r[2] == pytest.approx(0.0)

    # pair 3 (cone): right = mu(lam_n + dn) - f+ - df+ - f- - df- + s
    R3, r3 = problem.R[3], problem.r[3]
    assert r3 == pytest.approx(mu * 1.0 - 0.2 - 0.1)
    assert R3[lay.lam(0)][2] == pytest.approx(mu)
    assert R3[lay.lam(0)][0] == pytest.approx(-1.0)
    assert R3[lay.lam(0)][1] == pytest.approx(-1.0)
    assert problem.L[3][lay.slip(0)] == pytest.approx(1.0)

    # balance equality: one free body, three rows
    assert problem.A.shape[0] == 3
    assert problem.n == world.n_q + 5 * 3


def test_rest_fixed_point_zero_weight_task():
    """From balanced rest with the min-norm force memory, a zero-weight
    task keeps everything still and the forces unchanged."""
    world = one_candidate_world()
    task = TaskSpec(atoms=[])
    cfg = ControllerConfig()
    ctrl = Controller(world, task, cfg)
    mg = world.body("block").mass * world.gravity
    ctrl.lambda_prev[1, 2] = mg / 2
    ctrl.lambda_prev[2, 2] = mg / 2
    cmd = ctrl.step(world.q0())
    assert cmd.status == "solved"
    assert np.allclose(cmd.q_next, world.q0(), atol=1e-6)
    assert cmd.lambda_next[1, 2] == pytest.approx(mg / 2, abs=1e-6)
    assert cmd.lambda_next[2, 2] == pytest.approx(mg / 2, abs=1e-6)
    assert np.allclose(cmd.lambda_next[0], 0.0, atol=1e-6)
    assert np.allclose(cmd.q_tilde, world.q0()[:3], atol=1e-6)


def test_rest_keep_angles_command_is_identity():
    world = one_candidate_world()
    ctrl = Controller(world, angles_task(world), ControllerConfig())
    cmd = ctrl.step(world.q0())
    assert cmd.status == "solved"
    assert np.allclose(cmd.q_tilde, world.q0()[: world.n_a], atol=1e-6)
    assert np.allclose(cmd.lambda_next[0], 0.0, atol=1e-6)   # no force at a distance


def test_bound_respect():
    world = one_candidate_world()
    task = TaskSpec(atoms=[TaskAtom(kind="body_pos", body="finger", axis=1,
                                    ref=-1.0, weight=100.0)])
    cfg = ControllerConfig(h=0.01, v_max_lin=0.2, v_max_ang=1.0)
    ctrl = Controller(world, task, cfg)
    q = world.q0()
    for _ in range(5):
        cmd = ctrl.step(q)
        assert cmd.status == "solved"
        dq = cmd.q_next - q
        v = np.abs(dq) / cfg.h
        assert np.all(v <= cfg.v_max(world) + 1e-10)
        q = cmd.q_next


def test_command_complementarity(resting_box_world):
    """Accepted steps satisfy the pair products they were solved with."""
    world = resting_box_world
    task = TaskSpec(atoms=[TaskAtom(kind="body_pos", body="box", axis=0,
                                    ref=0.05, weight=50.0)])
    ctrl = Controller(world, task, ControllerConfig(force_gain=2000.0))
    q = world.q0()
    cmd = ctrl.step(q)
    assert cmd.status == "solved"
    assert cmd.comp_residual <= 1e-8


def test_force_to_position_conversion_sign(resting_box_world):
    """When the plan carries a contact force, the position command offsets
    by the transpose-Jacobian force over the gain, so a position-tracked
    spring realizes exactly that force."""
    world = resting_box_world
    task = TaskSpec(atoms=[TaskAtom(kind="body_pos", body="box", axis=0,
                                    ref=0.1, weight=200.0)], weight_force=1e-5)
    cfg = ControllerConfig(force_gain=2000.0)
    ctrl = Controller(world, task, cfg)
    sim = QuasistaticSim(resting_box_world_copy(), SimConfig(stiffness=2000.0))
    state = sim.initial_state()
    cmd = None
    for _ in range(80):
        q_before = state.q.copy()
        cmd = ctrl.step(q_before)
        state = sim.advance(state, cmd, cfg.h)
        if cmd.lambda_next[4, 2] > 0.3:
            break
    assert cmd.lambda_next[4, 2] > 0.3       # the plan pushes the box face
    geoms = evaluate_all(world, q_before)
    tau = actuated_generalized_force(world, q_before, geoms, cmd.lambda_next)
    assert tau[0] < 0.0                      # the box pushes back on the finger
    assert np.allclose(cmd.q_tilde,
                       cmd.q_next[: world.n_a] - tau / 2000.0, atol=1e-10)


def resting_box_world_copy():
    from lcqp2d.geometry import BoxShape, HalfPlaneShape, Pose2
    ground = Body("ground", HalfPlaneShape((0, 1), 0.0), Pose2(0, 0, 0), kind="static")
    box = Body("box", BoxShape(0.2, 0.1), Pose2(0.0, 0.05, 0.0), kind="free", mass=0.2)
    grip = Body("grip", BoxShape(0.02, 0.1), Pose2(-0.13, 0.05, 0.0), kind="actuated")
    cands = [ContactCandidate(i, box, ground, ground.shape.surface(), c, mu=0.5)
             for i, c in enumerate(box.shape.corners())]
    cands.append(ContactCandidate(4, grip, box, box.shape.face("-x"),
                                  np.array([0.01, 0.0]), mu=0.5))
    return World([ground, box, grip], cands)


def test_hold_policy_counts_failures(monkeypatch):
    world = one_candidate_world()
    ctrl = Controller(world, angles_task(world), ControllerConfig(hold_limit=3))
    from lcqp2d import controller as ctrl_mod
    from lcqp2d.lcqp import LcqpSolution

    def always_fail(problem, options=None, x0=None):
        return LcqpSolution(x=np.zeros(problem.n), objective=0.0,
                            comp_residual=1.0, kkt_residual=1.0,
                            feas_residual=0.0, status="max_penalty_reached")

    monkeypatch.setattr(ctrl_mod, "solve", always_fail)
    q = world.q0()
    for i in range(3):
        cmd = ctrl.step(q)
        assert cmd.hold
    assert ctrl.failed_out


def test_task_jacobian_atoms(mixed_world):
    world = mixed_world
    task = TaskSpec(atoms=[
        TaskAtom(kind="body_angle", body="grip", ref=0.5, weight=1.0),
        TaskAtom(kind="body_angle", body="box", ref=0.0, weight=1.0),
        TaskAtom(kind="body_pos", body="disk", axis=1, ref=0.2, weight=1.0),
        TaskAtom(kind="relative_angle", body="grip", other="box", ref=0.0, weight=1.0),
    ])
    q = world.q0()
    vals, G = task_jacobian(task, world, q)
    # angle atoms are identity selections
    assert G[0, world.cols(world.body("grip")).start + 2] == 1.0
    assert G[1, world.cols(world.body("box")).start + 2] == 1.0
    # finite differences
    h = 1e-6
    for j in range(world.n_q):
        e = np.zeros(world.n_q)
        e[j] = h
        fd = (np.array([a.value(world, q + e) for a in task.atoms])
              - np.array([a.value(world, q - e) for a in task.atoms])) / (2 * h)
        assert np.allclose(G[:, j], fd, atol=1e-6)


def test_task_error_wraps_angles(mixed_world):
    world = mixed_world
    task = TaskSpec(atoms=[TaskAtom(kind="body_angle", body="box", ref=0.0, weight=1.0)])
    q = world.q0()
    sl = world.cols(world.body("box"))
    q[sl.start + 2] = 2 * math.pi + 0.01
    err = task.error(world, q)
    assert err[0] == pytest.approx(0.01, abs=1e-12)


def test_task_objective_zero_at_goal(mixed_world):
    world = mixed_world
    q = world.q0()
    sl = world.cols(world.body("box"))
    task = TaskSpec(atoms=[TaskAtom(kind="body_angle", body="box",
                                    ref=q[sl.start + 2], weight=3.0)])
    val = task.objective(world, q, np.zeros(world.n_q), np.zeros((0, 3)), 0.01)
    assert val == pytest.approx(0.0, abs=1e-15)
