"""Deterministic quasistatic time-stepping simulator.

The environment side of the closed loop: actuated coordinates track the
position command through a stiffness (so commanded contact forces are
realized as spring deflections), while free bodies and contact forces
solve a strict complementarity problem at the true state every step. The
geometry is re-linearized in a few substeps until the step converges, so
realized states satisfy balance and complementarity at the post-step
configuration, not merely at the linearization point.

The simulator shares the contact model with the controller but never its
linearization point, relaxation, or measured state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .contact import (
    World,
    candidate_sign,
    complementarity_rows,
    evaluate_all,
    linearize_balance,
)
from .controller import Command, actuated_generalized_force, _SPLIT
from .geometry import BoxShape, DiskShape, cross2
from .lcqp import LcqpProblem, SolverOptions, solve


class SimulationError(RuntimeError):
    """The strict complementarity step could not be resolved."""


@dataclass
class WorldState:
    q: np.ndarray
    lam: np.ndarray          # (n_candidates, 3) realized forces of last step
    t: int = 0


@dataclass
class SimConfig:
    tracking_rate: float = 0.5       # fraction of the command gap taken per step
    v_max_lin: float = 0.4
    v_max_ang: float = 2.0
    gap_restore: float = 0.2         # fraction of penetration removed per step
    stiffness: float = 1000.0        # actuator spring, matches controller gain
    reg: float = 1e-6
    split_bias: float = 1e-6     # L1 bias keeping the tangential split lean
    max_substeps: int = 6
    substep_tol: float = 1e-11
    # The simulator tracks one physical answer from a warm start, so a
    # stiff initial penalty converges faster and drifts less than the
    # exploratory schedule the controller uses.
    solver: SolverOptions = field(
        default_factory=lambda: SolverOptions(rho_init_scale=1.0,
                                              branch_enum_pairs=14))


@dataclass
class _SimLayout:
    n_q: int
    n_c: int

    @property
    def n(self) -> int:
        return self.n_q + 4 * self.n_c

    def dq(self):
        return slice(0, self.n_q)

    def lam(self, i: int):
        return slice(self.n_q + 3 * i, self.n_q + 3 * i + 3)

    def slip(self, i: int) -> int:
        return self.n_q + 3 * self.n_c + i


class QuasistaticSim:
    """Advances a world under actuated position commands."""

    def __init__(self, world: World, cfg: SimConfig = None):
        self.world = world
        self.cfg = cfg or SimConfig()
        self.layout = _SimLayout(world.n_q, len(world.candidates))
        self._x_warm = None

    def initial_state(self) -> WorldState:
        return WorldState(q=self.world.q0(), lam=np.zeros((self.layout.n_c, 3)), t=0)

    def v_max(self) -> np.ndarray:
        out = np.empty(self.world.n_q)
        for b in self.world.actuated + self.world.free:
            sl = self.world.cols(b)
            out[sl.start:sl.start + 2] = self.cfg.v_max_lin
            out[sl.start + 2] = self.cfg.v_max_ang
        return out

    # -- stepping -----------------------------------------------------------

    def advance(self, state: WorldState, command: Command, h: float) -> WorldState:
        """One simulation step of duration h under the given command.

        Near non-smooth events (several contact transitions inside one
        step) the strict solve may not resolve at full step size, so the
        step is retried in 2, 4 and 8 time slices before giving up.
        Raises SimulationError when even the finest split fails; the
        harness records that as an environment failure.
        """
        world, cfg = self.world, self.cfg
        q0 = state.q
        v_max = self.v_max()
        gap = command.q_tilde - q0[: world.n_a]
        step_cap = h * v_max[: world.n_a]
        q_cmd = q0[: world.n_a] + np.clip(cfg.tracking_rate * gap, -step_cap, step_cap)

        last_err = None
        for pieces in (1, 2, 4, 8):
            cur = state
            try:
                for i in range(pieces):
                    frac = (i + 1) / pieces
                    target = q0[: world.n_a] + frac * (q_cmd - q0[: world.n_a])
                    cur = self._advance_piece(cur, target, h / pieces)
                return WorldState(q=cur.q, lam=cur.lam, t=state.t + 1)
            except SimulationError as err:
                last_err = err
        raise SimulationError(
            f"strict complementarity step failed at t={state.t} "
            f"after time-slicing ({last_err})")

    def _advance_piece(self, state: WorldState, q_cmd: np.ndarray,
                       h: float) -> WorldState:
        world, cfg, lay = self.world, self.cfg, self.layout
        q0 = state.q
        phi0 = np.array([g.phi for g in evaluate_all(world, q0)])
        y = q0.copy()
        slip_acc = np.zeros(lay.n_c)
        lam_warm = np.maximum(state.lam, 0.0)
        lam_new = lam_warm
        budget = h * self.v_max()

        for sub in range(cfg.max_substeps):
            geoms = evaluate_all(world, y)
            problem = self._substep_problem(y, q_cmd, q0, phi0, slip_acc,
                                            lam_warm, geoms, budget)
            sol = solve(problem, cfg.solver, x0=self._substep_start(lam_warm, slip_acc))
            if not sol.solved:
                raise SimulationError(
                    f"status {sol.status}, comp {sol.comp_residual:.2e}")
            x = sol.x
            delta = x[lay.dq()]
            lam_new = np.vstack([x[lay.lam(i)] for i in range(lay.n_c)]) if lay.n_c \
                else np.zeros((0, 3))
            for g in geoms:
                if g.active:
                    slip_acc[g.candidate.index] += float(g.psi_jac @ delta)
            y = y + delta
            budget = budget - np.abs(delta)
            lam_warm = np.maximum(lam_new, 0.0)
            self._x_warm = x
            if float(np.max(np.abs(delta), initial=0.0)) <= cfg.substep_tol * (
                    1.0 + float(np.max(np.abs(y)))):
                break

        return WorldState(q=y, lam=lam_new, t=state.t)

    def _substep_start(self, lam_warm, slip_acc=None):
        """Warm start satisfying the pair-side rows at delta = 0."""
        lay = self.layout
        x0 = np.zeros(lay.n)
        for i in range(lay.n_c):
            f_pos, f_neg, normal = lam_warm[i]
            cone = self.world.candidates[i].mu * normal
            spread = f_pos + f_neg
            if spread > cone > 0.0:
                shrink = cone / spread
                f_pos, f_neg = f_pos * shrink, f_neg * shrink
            elif spread > cone:
                f_pos = f_neg = 0.0
            x0[lay.lam(i)] = (f_pos, f_neg, normal)
            if slip_acc is not None:
                x0[lay.slip(i)] = abs(slip_acc[i])
        return x0

    def _substep_problem(self, y, q_cmd, q0, phi0, slip_acc, lam_warm, geoms,
                         budget) -> LcqpProblem:
        """Strict complementarity step linearized at y.

        Unknowns: [dq | lambda (3 per candidate) | slip bound (1 per
        candidate)]. The forces are full unknowns, not increments; only
        the geometry is linearized. A fraction of any pre-step penetration
        is restored through the normal gap offset.
        """
        world, cfg, lay = self.world, self.cfg, self.layout
        n, n_q, n_c = lay.n, lay.n_q, lay.n_c

        Q = np.zeros((n, n))
        g_lin = np.zeros(n)
        Q[lay.dq(), lay.dq()] = cfg.reg * np.eye(n_q)
        for i in range(n_c):
            Q[lay.lam(i), lay.lam(i)] = cfg.reg * np.eye(3)
            Q[lay.slip(i), lay.slip(i)] = cfg.reg
            g_lin[lay.lam(i)] = (cfg.split_bias, cfg.split_bias, 0.0)

        rows_A, vec_b = [], []
        # Actuated coordinates: spring toward the tracking target balances
        # the contact forces on the actuated bodies.
        K = cfg.stiffness
        for body in world.actuated:
            cols = world.cols(body)
            pose = world.pose(body, y)
            for k in range(3):
                j = cols.start + k
                row = np.zeros(n)
                row[j] = -K
                for g in geoms:
                    sign = candidate_sign(g.candidate, body)
                    if sign == 0.0 or not g.active:
                        continue
                    Fcols = sign * (g.frame.rotation @ _SPLIT)      # (2, 3)
                    arm = g.frame.point - pose.origin()
                    if k < 2:
                        row[lay.lam(g.candidate.index)] += Fcols[k]
                    else:
                        row[lay.lam(g.candidate.index)] += (
                            arm[0] * Fcols[1] - arm[1] * Fcols[0])
                rows_A.append(row)
                vec_b.append(K * (q_cmd[j] - y[j]))

        # Free bodies: quasistatic balance, exact in the force unknowns,
        # geometry linearized around y with the warm forces.
        for body in world.free:
            blk = linearize_balance(world, body, y, lam_warm, geoms=geoms)
            block = np.zeros((3, n))
            block[:, lay.dq()] = blk.d_dq
            for idx, dmat in blk.d_dlambda.items():
                if geoms[idx].active:
                    block[:, lay.lam(idx)] = dmat
            rows_A.append(block[0]); rows_A.append(block[1]); rows_A.append(block[2])
            vec_b.extend(world.constant_wrench(body))

        A = np.vstack(rows_A) if rows_A else None
        b = np.array(vec_b) if rows_A else None

        L_rows, l_vals, R_rows, r_vals = [], [], [], []
        lb = np.full(n, -math.inf)
        ub = np.full(n, math.inf)
        zero_force = np.zeros(3)
        for g in geoms:
            i = g.candidate.index
            if not g.active:
                lb[lay.lam(i)] = ub[lay.lam(i)] = 0.0
                lb[lay.slip(i)] = ub[lay.slip(i)] = 0.0
                continue
            restore = -(1.0 - cfg.gap_restore) * min(phi0[i], 0.0)
            pairs = complementarity_rows(g, zero_force, gap_offset=restore,
                                         slip_offset=slip_acc[i])
            for pair in pairs:
                for expr, rows, vals in ((pair.left, L_rows, l_vals),
                                         (pair.right, R_rows, r_vals)):
                    row = np.zeros(n)
                    row[lay.dq()] = expr.dq
                    row[lay.lam(i)] = expr.dlam
                    row[lay.slip(i)] = expr.slip
                    rows.append(row)
                    vals.append(expr.const)
            lb[lay.slip(i)] = 0.0

        lb[lay.dq()] = -np.maximum(budget, 0.0)
        ub[lay.dq()] = np.maximum(budget, 0.0)

        L = np.vstack(L_rows) if L_rows else np.zeros((0, n))
        R = np.vstack(R_rows) if R_rows else np.zeros((0, n))
        return LcqpProblem(Q=Q, g=g_lin, A=A, b=b, lb=lb, ub=ub,
                           L=L, l=np.array(l_vals), R=R, r=np.array(r_vals))


# ---------------------------------------------------------------------------
# Noise


@dataclass(frozen=True)
class NoiseModel:
    """Reproducible model-error and measurement-noise description."""

    model_error_scale: float = 0.0
    measurement_noise_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.model_error_scale < 0 or self.measurement_noise_scale < 0:
            raise ValueError("noise scales must be nonnegative")


def body_size(shape) -> float:
    if isinstance(shape, BoxShape):
        return max(shape.width, shape.height)
    if isinstance(shape, DiskShape):
        return 2.0 * shape.radius
    return 0.0


class TrialNoise:
    """Per-trial noise state: one shape draw, a measurement draw per step.

    Shape perturbations are drawn once from a dedicated stream so that the
    per-step measurement stream stays aligned across runs.
    """

    def __init__(self, model: NoiseModel, world: World):
        self.model = model
        self.world = world
        seq = np.random.SeedSequence(model.seed)
        shape_seq, meas_seq = seq.spawn(2)
        self._gen_meas = np.random.default_rng(meas_seq)
        gen_shape = np.random.default_rng(shape_seq)
        self.shapes = {}
        for body in world.bodies:
            if body.kind == "static" or not isinstance(body.shape, (BoxShape, DiskShape)):
                continue
            s = self.model.model_error_scale
            if isinstance(body.shape, BoxShape):
                w = body.shape.width * (1.0 + s * gen_shape.standard_normal())
                h = body.shape.height * (1.0 + s * gen_shape.standard_normal())
                self.shapes[body.name] = BoxShape(max(w, 1e-6), max(h, 1e-6))
            else:
                r = body.shape.radius * (1.0 + s * gen_shape.standard_normal())
                self.shapes[body.name] = DiskShape(max(r, 1e-6))

    def measure(self, q: np.ndarray) -> np.ndarray:
        """Measured configuration: position noise proportional to body size,
        angle noise at the raw scale."""
        out = q.copy()
        s = self.model.measurement_noise_scale
        for body in self.world.actuated + self.world.free:
            cols = self.world.cols(body)
            size = body_size(body.shape)
            noise = self._gen_meas.standard_normal(3)
            if s > 0.0:
                out[cols.start] += s * size * noise[0]
                out[cols.start + 1] += s * size * noise[1]
                out[cols.start + 2] += s * noise[2]
        return out


def measure(state: WorldState, noise: TrialNoise):
    """Measured configuration plus the trial's perturbed shape table."""
    return noise.measure(state.q), noise.shapes
