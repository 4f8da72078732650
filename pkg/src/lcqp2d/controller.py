"""One-step contact-implicit controller.

Every control step linearizes the quasistatic model at the measured state
and solves one QP with linear complementarity constraints whose decision
vector stacks [dq | dlambda (3 per candidate) | slip bound (1 per
candidate) | slack (1 per candidate, relaxed mode only)]. The solution is
turned into a position command for the actuated bodies, with the planned
contact forces folded in through a stiffness gain so a position-tracked
actuator realizes them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .contact import (
    FREE,
    CandidateGeometry,
    World,
    candidate_sign,
    complementarity_rows,
    evaluate_all,
    linearize_balance,
    relax_rows,
)
from .geometry import cross2, point_jacobian, wrap_angle
from .lcqp import LcqpProblem, LcqpSolution, SolverOptions, solve


# ---------------------------------------------------------------------------
# Task maps


@dataclass(frozen=True)
class TaskAtom:
    """One differentiable scalar of the task map.

    kinds: body_angle (theta of a body), body_pos (one position component,
    axis 0 or 1), relative_angle (theta difference second minus first).
    """

    kind: str
    body: str
    ref: float
    weight: float = 1.0
    axis: int = 0
    other: Optional[str] = None
    wrap: bool = field(init=False, default=False)

    def __post_init__(self):
        if self.kind not in ("body_angle", "body_pos", "relative_angle"):
            raise ValueError(f"unknown task atom kind {self.kind!r}")
        object.__setattr__(self, "wrap", self.kind in ("body_angle", "relative_angle"))

    def value(self, world: World, q: np.ndarray) -> float:
        cols = world.cols(world.body(self.body))
        if cols is None:
            raise ValueError(f"task atom targets static body {self.body!r}")
        if self.kind == "body_angle":
            return float(q[cols.start + 2])
        if self.kind == "body_pos":
            return float(q[cols.start + self.axis])
        other_cols = world.cols(world.body(self.other))
        return float(q[other_cols.start + 2] - q[cols.start + 2])

    def jacobian(self, world: World, q: np.ndarray) -> np.ndarray:
        row = np.zeros(world.n_q)
        cols = world.cols(world.body(self.body))
        if self.kind == "body_angle":
            row[cols.start + 2] = 1.0
        elif self.kind == "body_pos":
            row[cols.start + self.axis] = 1.0
        else:
            other_cols = world.cols(world.body(self.other))
            row[other_cols.start + 2] = 1.0
            row[cols.start + 2] = -1.0
        return row


@dataclass
class TaskSpec:
    """Task map plus all objective weights of the controller QP."""

    atoms: list
    weight_dq: float = 1.0
    weight_force: float = 1e-4
    slack_penalty: float = 1e4

    def error(self, world: World, q: np.ndarray) -> np.ndarray:
        """Task residual; angle-like atoms are wrapped to (-pi, pi]."""
        out = np.empty(len(self.atoms))
        for i, a in enumerate(self.atoms):
            e = a.value(world, q) - a.ref
            out[i] = wrap_angle(e) if a.wrap else e
        return out

    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms])

    def objective(self, world: World, q: np.ndarray, dq: np.ndarray,
                  lam_next: np.ndarray, h: float) -> float:
        """The controller's underlying cost at a commanded state."""
        err = self.error(world, q) + self.task_jacobian(world, q)[1] @ dq
        v = dq / h
        return float(0.5 * err @ (self.weights() * err)
                     + 0.5 * self.weight_dq * (v @ v) * h * h
                     + 0.5 * self.weight_force * float(np.sum(lam_next * lam_next)))

    def task_jacobian(self, world: World, q: np.ndarray):
        """Task values and their analytic Jacobian at q."""
        vals = np.array([a.value(world, q) for a in self.atoms])
        G = np.vstack([a.jacobian(world, q) for a in self.atoms]) if self.atoms \
            else np.zeros((0, world.n_q))
        return vals, G


def task_jacobian(task: TaskSpec, world: World, q: np.ndarray):
    return task.task_jacobian(world, q)


# ---------------------------------------------------------------------------
# Controller configuration and commands


@dataclass
class CollisionLimit:
    """Keep a body point on the outer side of a static surface."""

    point_body: str
    point: tuple
    surface_body: str
    margin: float = 0.02


@dataclass
class ControllerConfig:
    h: float = 0.01
    force_gain: float = 1000.0
    v_max_lin: float = 0.25
    v_max_ang: float = 1.2
    lambda_max: float = 100.0
    q_min: Optional[np.ndarray] = None
    q_max: Optional[np.ndarray] = None
    relaxed: bool = True
    hold_limit: int = 10
    collision_limits: list = field(default_factory=list)
    solver: SolverOptions = field(default_factory=SolverOptions)

    def v_max(self, world: World) -> np.ndarray:
        out = np.empty(world.n_q)
        for b in world.actuated + world.free:
            sl = world.cols(b)
            out[sl.start:sl.start + 2] = self.v_max_lin
            out[sl.start + 2] = self.v_max_ang
        return out


@dataclass
class Command:
    """One control step's output."""

    q_next: np.ndarray
    lambda_next: np.ndarray          # (n_candidates, 3)
    q_tilde: np.ndarray              # actuated position command
    status: str
    objective: float = math.inf
    slack: np.ndarray = None
    slip: np.ndarray = None
    gaps: np.ndarray = None
    solve_time: float = 0.0
    hold: bool = False
    comp_residual: float = math.inf


@dataclass
class _Layout:
    """Column layout of the controller decision vector."""

    n_q: int
    n_c: int
    relaxed: bool

    @property
    def n(self) -> int:
        per = 5 if self.relaxed else 4
        return self.n_q + per * self.n_c

    def dq(self):
        return slice(0, self.n_q)

    def lam(self, i: int):
        return slice(self.n_q + 3 * i, self.n_q + 3 * i + 3)

    def slip(self, i: int) -> int:
        return self.n_q + 3 * self.n_c + i

    def slack(self, i: int) -> int:
        if not self.relaxed:
            raise IndexError("strict mode carries no slack variables")
        return self.n_q + 4 * self.n_c + i


_SPLIT = np.array([[1.0, -1.0, 0.0], [0.0, 0.0, 1.0]])


def actuated_generalized_force(world: World, q: np.ndarray, geoms,
                               lam: np.ndarray) -> np.ndarray:
    """Contact forces mapped onto the actuated coordinates.

    For each candidate touching an actuated body, take the world force it
    applies to that body and reduce it to the body's (x, y, theta)
    directions; this is the transpose-Jacobian image of the contact forces
    and is what a position-tracked actuator has to fight.
    """
    tau = np.zeros(world.n_a)
    for g in geoms:
        for body in (g.candidate.point_body, g.candidate.surface_body):
            cols = world.cols(body)
            if body.kind != "actuated" or cols is None:
                continue
            sign = candidate_sign(g.candidate, body)
            F = sign * (g.frame.rotation @ (_SPLIT @ lam[g.candidate.index]))
            arm = g.frame.point - world.pose(body, q).origin()
            tau[cols.start:cols.start + 2] += F
            tau[cols.start + 2] += cross2(arm, F)
    return tau


class Controller:
    """Stateful per-trial controller; call step() once per control period.

    The instance keeps the previous force command (the linearization point
    for the next step), the previous decision vector for warm starting,
    and the solver-failure streak that implements the hold policy.
    """

    def __init__(self, world: World, task: TaskSpec, cfg: ControllerConfig):
        self.world = world
        self.task = task
        self.cfg = cfg
        n_c = len(world.candidates)
        self.layout = _Layout(world.n_q, n_c, cfg.relaxed)
        self.lambda_prev = np.zeros((n_c, 3))
        self._x_warm = None
        self._fail_streak = 0
        self._last_command: Optional[Command] = None
        self._witnesses = self._build_witnesses()

    def _build_witnesses(self):
        out = []
        for lim in self.cfg.collision_limits:
            body = self.world.body(lim.point_body)
            surf_body = self.world.body(lim.surface_body)
            if not hasattr(surf_body.shape, "surface"):
                raise ValueError("collision limits need a half-plane surface body")
            from .contact import ContactCandidate
            out.append((ContactCandidate(index=0, point_body=body,
                                         surface_body=surf_body,
                                         surface=surf_body.shape.surface(),
                                         point_local=np.asarray(lim.point, dtype=float),
                                         mu=1.0), lim.margin))
        return out

    # -- assembly ------------------------------------------------------------

    def build_lcqp(self, q: np.ndarray, lam_prev: np.ndarray = None,
                   geoms=None) -> LcqpProblem:
        """Assemble the step QP with complementarity pairs at state q."""
        world, task, cfg, lay = self.world, self.task, self.cfg, self.layout
        if lam_prev is None:
            lam_prev = self.lambda_prev
        lam_prev = np.maximum(lam_prev, 0.0)
        if geoms is None:
            geoms = evaluate_all(world, q)
        n, n_q, n_c = lay.n, lay.n_q, lay.n_c

        err = task.error(world, q)
        _, G = task.task_jacobian(world, q)
        w = task.weights()

        Q = np.zeros((n, n))
        g_lin = np.zeros(n)
        Q[lay.dq(), lay.dq()] = (G.T * w) @ G + task.weight_dq * np.eye(n_q)
        g_lin[lay.dq()] = G.T @ (w * err)
        for i in range(n_c):
            Q[lay.lam(i), lay.lam(i)] = task.weight_force * np.eye(3)
            g_lin[lay.lam(i)] = task.weight_force * lam_prev[i]
            if lay.relaxed:
                Q[lay.slack(i), lay.slack(i)] = 2.0 * task.slack_penalty

        # Force and moment balance of every free body, linearized.
        rows_A, vec_b = [], []
        for body in world.free:
            blk = linearize_balance(world, body, q, lam_prev, geoms=geoms)
            block = np.zeros((3, n))
            block[:, lay.dq()] = blk.d_dq
            for idx, dmat in blk.d_dlambda.items():
                block[:, lay.lam(idx)] = dmat
            rows_A.append(block)
            vec_b.append(blk.residual)
        A = np.vstack(rows_A) if rows_A else None
        b = np.concatenate(vec_b) if rows_A else None

        # Complementarity pairs of the live candidates.
        L_rows, l_vals, R_rows, r_vals = [], [], [], []
        lb = np.full(n, -math.inf)
        ub = np.full(n, math.inf)
        for g in geoms:
            i = g.candidate.index
            if not g.active:
                lb[lay.lam(i)] = ub[lay.lam(i)] = -lam_prev[i]
                lb[lay.slip(i)] = ub[lay.slip(i)] = 0.0
                if lay.relaxed:
                    lb[lay.slack(i)] = ub[lay.slack(i)] = 0.0
                continue
            pairs = complementarity_rows(g, lam_prev[i])
            if lay.relaxed:
                pairs = relax_rows(pairs)
            for pair in pairs:
                for expr, rows, vals in ((pair.left, L_rows, l_vals),
                                         (pair.right, R_rows, r_vals)):
                    row = np.zeros(n)
                    row[lay.dq()] = expr.dq
                    row[lay.lam(i)] = expr.dlam
                    row[lay.slip(i)] = expr.slip
                    if lay.relaxed:
                        row[lay.slack(i)] = expr.slack
                    rows.append(row)
                    vals.append(expr.const)
            lb[lay.slip(i)] = 0.0
            ub[lay.lam(i)] = cfg.lambda_max - lam_prev[i]
            if lay.relaxed:
                lb[lay.slack(i)] = 0.0

        # Motion bounds: speed limit plus configuration box. A measured
        # state outside the box must not make the step infeasible, so the
        # box side only forbids going further out.
        v_max = cfg.v_max(world)
        step_lb = -cfg.h * v_max
        step_ub = cfg.h * v_max
        if cfg.q_min is not None:
            step_lb = np.maximum(step_lb, np.minimum(cfg.q_min - q, 0.0))
        if cfg.q_max is not None:
            step_ub = np.minimum(step_ub, np.maximum(cfg.q_max - q, 0.0))
        lb[lay.dq()] = step_lb
        ub[lay.dq()] = step_ub

        # Collision witnesses: linearized clearance floor.
        C_rows, d_vals = [], []
        from .contact import evaluate_candidate
        for cand, margin in self._witnesses:
            wg = evaluate_candidate(world, cand, q)
            margin_eff = min(margin, wg.phi)
            row = np.zeros(n)
            row[lay.dq()] = wg.phi_jac
            C_rows.append(row)
            d_vals.append(wg.phi - margin_eff)
        # Planned contacts stay inside the validity window of finite
        # surfaces (with half the margin as safety): sliding a point off
        # the end of a face would silently drop the candidate. Past the
        # kept band the plan must retreat, but only gently so the step
        # stays feasible.
        for g in geoms:
            if not g.active:
                continue
            surf = g.candidate.surface
            for sign_w, limit in ((-1.0, surf.t_hi), (1.0, -surf.t_lo)):
                if not math.isfinite(limit):
                    continue
                room = (limit + 0.5 * surf.margin) + sign_w * g.tangent_coord
                row = np.zeros(n)
                row[lay.dq()] = sign_w * g.psi_jac
                C_rows.append(row)
                d_vals.append(max(room, -1e-3))
        C = np.vstack(C_rows) if C_rows else None
        d = np.array(d_vals) if C_rows else None

        L = np.vstack(L_rows) if L_rows else np.zeros((0, n))
        R = np.vstack(R_rows) if R_rows else np.zeros((0, n))
        return LcqpProblem(Q=Q, g=g_lin, A=A, b=b, C=C, d=d, lb=lb, ub=ub,
                           L=L, l=np.array(l_vals), R=R, r=np.array(r_vals))

    # -- stepping ------------------------------------------------------------

    def _initial_point(self, q, geoms):
        lay = self.layout
        x0 = np.zeros(lay.n)
        if self._x_warm is not None and self._x_warm.shape == x0.shape:
            x0 = self._x_warm.copy()
            x0[lay.dq()] = 0.0
        if lay.relaxed:
            for g in geoms:
                if g.active:
                    x0[lay.slack(g.candidate.index)] = max(0.0, -g.phi) + 1e-12
        return x0

    def step(self, q: np.ndarray) -> Command:
        """Solve one control step at the measured configuration q."""
        world, cfg, lay = self.world, self.cfg, self.layout
        t0 = time.perf_counter()
        self.lambda_prev = np.maximum(self.lambda_prev, 0.0)
        # Force memory stays inside the friction cone so the fresh QP
        # starts complementarity-consistent.
        for i, cand in enumerate(world.candidates):
            cone = cand.mu * self.lambda_prev[i, 2]
            spread = self.lambda_prev[i, 0] + self.lambda_prev[i, 1]
            if spread > cone:
                shrink = cone / spread if spread > 0.0 else 0.0
                self.lambda_prev[i, 0] *= shrink
                self.lambda_prev[i, 1] *= shrink
        geoms = evaluate_all(world, q)
        problem = self.build_lcqp(q, geoms=geoms)
        sol = solve(problem, cfg.solver, x0=self._initial_point(q, geoms))
        elapsed = time.perf_counter() - t0

        if not sol.solved:
            self._fail_streak += 1
            prev = self._last_command
            q_tilde = prev.q_tilde if prev is not None else q[: world.n_a].copy()
            cmd = Command(q_next=q.copy(), lambda_next=self.lambda_prev.copy(),
                          q_tilde=q_tilde, status=sol.status, hold=True,
                          solve_time=elapsed, comp_residual=sol.comp_residual,
                          slack=np.zeros(lay.n_c), slip=np.zeros(lay.n_c),
                          gaps=np.array([g.phi for g in geoms]))
            self._last_command = cmd
            return cmd

        self._fail_streak = 0
        x = sol.x
        dq = x[lay.dq()]
        dlam = np.vstack([x[lay.lam(i)] for i in range(lay.n_c)]) if lay.n_c \
            else np.zeros((0, 3))
        slip = np.array([x[lay.slip(i)] for i in range(lay.n_c)])
        slack = np.array([x[lay.slack(i)] for i in range(lay.n_c)]) if lay.relaxed \
            else np.zeros(lay.n_c)

        q_next = q + dq
        lam_next = self.lambda_prev + dlam
        tau = actuated_generalized_force(world, q, geoms, lam_next)
        gain = np.broadcast_to(np.atleast_1d(np.asarray(cfg.force_gain, dtype=float)),
                               (world.n_a,))
        q_tilde = q_next[: world.n_a] - tau / gain

        cmd = Command(q_next=q_next, lambda_next=lam_next, q_tilde=q_tilde,
                      status=sol.status,
                      objective=self.task.objective(world, q, dq, lam_next, cfg.h),
                      slack=slack, slip=slip,
                      gaps=np.array([g.phi for g in geoms]),
                      solve_time=elapsed, comp_residual=sol.comp_residual)
        self.lambda_prev = lam_next
        self._x_warm = x
        self._last_command = cmd
        return cmd

    @property
    def failed_out(self) -> bool:
        return self._fail_streak >= self.cfg.hold_limit
