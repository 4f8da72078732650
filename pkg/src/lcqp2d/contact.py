"""Quasistatic contact model over a small planar world.

A World is an ordered collection of bodies (static environment, actuated,
and free) plus a fixed list of point-on-surface contact candidates. The
functions here turn a configuration and a set of contact forces into the
constraint data a complementarity QP needs: signed distances, tangential
velocities, their analytic Jacobians, force/moment balance blocks, and the
four linearized complementarity pairs per candidate (optionally relaxed by
a shared slack).

All functions are pure; they are safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import (
    BodyShape,
    BoxShape,
    ContactFrame,
    DiskShape,
    HalfPlaneShape,
    Pose2,
    Surface,
    cross2,
    drot,
    point_jacobian,
    surface_world,
)

STATIC = "static"
ACTUATED = "actuated"
FREE = "free"


@dataclass
class Body:
    """One rigid body. Free bodies carry mass and a constant wrench."""

    name: str
    shape: BodyShape
    pose0: Pose2
    kind: str = STATIC
    mass: float = 0.0
    com: tuple = (0.0, 0.0)
    extra_wrench: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in (STATIC, ACTUATED, FREE):
            raise ValueError(f"unknown body kind {self.kind!r}")
        if self.kind == FREE and self.mass <= 0:
            raise ValueError(f"free body {self.name!r} needs positive mass")

    def com_vec(self) -> np.ndarray:
        return np.asarray(self.com, dtype=float)


@dataclass
class ContactCandidate:
    """A declared point-surface pair.

    point_local is a body-frame point, or None for a disk body, whose
    effective contact point (the boundary point closest to the paired
    surface) is recomputed at every configuration.
    """

    index: int
    point_body: Body
    surface_body: Body
    surface: Surface
    point_local: Optional[np.ndarray] = None
    mu: float = 0.5

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("friction coefficient must be positive")
        if self.point_body is self.surface_body:
            raise ValueError("self-contact candidates are not supported")
        if self.point_local is None and not isinstance(self.point_body.shape, DiskShape):
            raise ValueError("implicit contact point requires a disk body")
        if self.point_local is not None:
            self.point_local = np.asarray(self.point_local, dtype=float)


@dataclass(frozen=True)
class ContactForce:
    """Force of one candidate: nonnegative tangential split plus normal."""

    tangent_pos: float = 0.0
    tangent_neg: float = 0.0
    normal: float = 0.0

    @property
    def tangential(self) -> float:
        return self.tangent_pos - self.tangent_neg

    def as_vec(self) -> np.ndarray:
        return np.array([self.tangent_pos, self.tangent_neg, self.normal])


@dataclass(frozen=True)
class Configuration:
    """Stacked generalized coordinates, actuated block first."""

    q_a: np.ndarray
    q_u: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.q_a, self.q_u])


class World:
    """Bodies plus contact candidates, with the q-vector bookkeeping.

    The configuration stacks every actuated body pose (x, y, theta) in
    declaration order followed by every free body pose.
    """

    def __init__(self, bodies, candidates=(), gravity: float = 9.81):
        names = [b.name for b in bodies]
        if len(set(names)) != len(names):
            raise ValueError("duplicate body names")
        self.bodies = list(bodies)
        self.gravity = float(gravity)
        self.actuated = [b for b in self.bodies if b.kind == ACTUATED]
        self.free = [b for b in self.bodies if b.kind == FREE]
        self.n_a = 3 * len(self.actuated)
        self.n_u = 3 * len(self.free)
        self.n_q = self.n_a + self.n_u
        self._slices = {}
        col = 0
        for b in self.actuated + self.free:
            self._slices[b.name] = slice(col, col + 3)
            col += 3
        self.candidates = list(candidates)
        for i, c in enumerate(self.candidates):
            if c.index != i:
                raise ValueError("candidate indices must match list order")
            for b in (c.point_body, c.surface_body):
                if b not in self.bodies:
                    raise ValueError(f"candidate {i} references unknown body")

    def body(self, name: str) -> Body:
        for b in self.bodies:
            if b.name == name:
                return b
        raise KeyError(name)

    def cols(self, body: Body) -> Optional[slice]:
        return self._slices.get(body.name)

    def q0(self) -> np.ndarray:
        vecs = [b.pose0.as_vec() for b in self.actuated + self.free]
        return np.concatenate(vecs) if vecs else np.zeros(0)

    def pose(self, body: Body, q: np.ndarray) -> Pose2:
        sl = self.cols(body)
        if sl is None:
            return body.pose0
        return Pose2.from_vec(q[sl])

    def split(self, q: np.ndarray) -> Configuration:
        return Configuration(q_a=q[: self.n_a].copy(), q_u=q[self.n_a:].copy())

    def com_world(self, body: Body, q: np.ndarray) -> np.ndarray:
        return self.pose(body, q).to_world(body.com_vec())

    def constant_wrench(self, body: Body) -> np.ndarray:
        w = np.asarray(body.extra_wrench, dtype=float).copy()
        w[1] -= body.mass * self.gravity
        return w


# ---------------------------------------------------------------------------
# Candidate geometry


@dataclass
class CandidateGeometry:
    """Everything the assemblers need about one candidate at one q."""

    candidate: ContactCandidate
    phi: float
    frame: ContactFrame
    active: bool
    tangent_coord: float
    phi_jac: np.ndarray       # (n_q,) gradient of phi
    psi_jac: np.ndarray       # (n_q,) d(tangential velocity)/dv
    point_jac: np.ndarray     # (2, n_q) resolved contact-point Jacobian


def _resolved_point(world: World, cand: ContactCandidate, q: np.ndarray, n_w):
    """World contact point; disks use the boundary point facing the surface."""
    pose_p = world.pose(cand.point_body, q)
    if cand.point_local is not None:
        return pose_p.to_world(cand.point_local)
    radius = cand.point_body.shape.radius
    return pose_p.origin() - radius * n_w


def evaluate_candidate(world: World, cand: ContactCandidate, q: np.ndarray) -> CandidateGeometry:
    n_q = world.n_q
    pose_s = world.pose(cand.surface_body, q)
    pose_p = world.pose(cand.point_body, q)
    n_w, t_w, offset_w = surface_world(pose_s, cand.surface)
    p_w = _resolved_point(world, cand, q, n_w)
    phi = float(n_w @ p_w - offset_w)

    # Validity window along the surface tangent (body frame of the surface).
    p_surf_local = pose_s.to_local(p_w)
    t_coord = float(cand.surface.tangent_vec() @ p_surf_local)
    active = cand.surface.contains_tangent(t_coord)

    # Reference object for the frame arm: prefer a free body of the pair.
    if cand.surface_body.kind == FREE:
        ref = cand.surface_body
    elif cand.point_body.kind == FREE:
        ref = cand.point_body
    else:
        ref = None
    arm = p_w - world.com_world(ref, q) if ref is not None else np.zeros(2)
    frame = ContactFrame(rotation=np.column_stack([t_w, n_w]), point=p_w, arm=arm)

    # Resolved contact-point Jacobian (2, n_q).
    point_jac = np.zeros((2, n_q))
    cp = world.cols(cand.point_body)
    cs = world.cols(cand.surface_body)
    is_disk = cand.point_local is None
    if cp is not None:
        if is_disk:
            point_jac[:, cp.start:cp.start + 2] = np.eye(2)
        else:
            point_jac[:, cp] = point_jacobian(pose_p, cand.point_local)
    if cs is not None and is_disk:
        radius = cand.point_body.shape.radius
        dn_w = drot(pose_s.theta) @ cand.surface.normal_vec()
        point_jac[:, cs.start + 2] -= radius * dn_w

    # Gradient of phi. For disks the extra point motion along dn_w is
    # orthogonal to n_w, so point_jac contributes nothing spurious there.
    phi_jac = n_w @ point_jac
    if cs is not None:
        dn_w = drot(pose_s.theta) @ cand.surface.normal_vec()
        phi_jac[cs.start:cs.start + 2] -= n_w
        phi_jac[cs.start + 2] += float(dn_w @ (p_w - pose_s.origin()))

    # d(tangential relative velocity)/dv, using material points of both bodies.
    psi_jac = np.zeros(n_q)
    if cp is not None:
        a_mat = pose_p.to_local(p_w)
        psi_jac[cp] += t_w @ point_jacobian(pose_p, a_mat)
    if cs is not None:
        b_mat = pose_s.to_local(p_w)
        psi_jac[cs] -= t_w @ point_jacobian(pose_s, b_mat)

    return CandidateGeometry(
        candidate=cand,
        phi=phi,
        frame=frame,
        active=active,
        tangent_coord=t_coord,
        phi_jac=phi_jac,
        psi_jac=psi_jac,
        point_jac=point_jac,
    )


def evaluate_all(world: World, q: np.ndarray):
    return [evaluate_candidate(world, c, q) for c in world.candidates]


def signed_distance(world: World, cand: ContactCandidate, q: np.ndarray):
    """Signed point-surface distance and the contact frame at q.

    Negative values are legal and mean measured penetration depth.
    """
    g = evaluate_candidate(world, cand, q)
    return g.phi, g.frame


def distance_jacobian(world: World, cand: ContactCandidate, q: np.ndarray) -> np.ndarray:
    """Analytic gradient of signed_distance with respect to every coordinate."""
    return evaluate_candidate(world, cand, q).phi_jac


def tangential_velocity(world: World, cand: ContactCandidate, q: np.ndarray, v: np.ndarray):
    """Relative tangential speed of the contact point and its velocity Jacobian.

    The speed is exactly linear in v, so psi == jac @ v.
    """
    jac = evaluate_candidate(world, cand, q).psi_jac
    return float(jac @ v), jac


def tangential_offset(world: World, cand: ContactCandidate, q: np.ndarray, q_ref: np.ndarray) -> float:
    """Tangential slide of the contact point between q_ref and q.

    Measured as the change of the point's tangent coordinate in the surface
    frame; used by the simulator to accumulate slip across substeps.
    """
    g = evaluate_candidate(world, cand, q)
    g_ref = evaluate_candidate(world, cand, q_ref)
    return g.tangent_coord - g_ref.tangent_coord


# ---------------------------------------------------------------------------
# Force and moment balance


# Maps (tangent_pos, tangent_neg, normal) to (tangential, normal) force.
_SPLIT = np.array([[1.0, -1.0, 0.0], [0.0, 0.0, 1.0]])


def _signed_objects(world: World, cand: ContactCandidate):
    """Free bodies this candidate loads, with action/reaction signs."""
    out = []
    if cand.point_body.kind == FREE:
        out.append((cand.point_body, 1.0))
    if cand.surface_body.kind == FREE:
        out.append((cand.surface_body, -1.0))
    return out


def candidate_sign(cand: ContactCandidate, body: Body) -> float:
    """Sign with which this candidate's force enters the body's balance."""
    if cand.point_body is body:
        return 1.0
    if cand.surface_body is body:
        return -1.0
    return 0.0


@dataclass
class BalanceBlock:
    """Linearization of one free body's force/moment balance."""

    residual: np.ndarray                    # (3,)
    d_dq: np.ndarray                        # (3, n_q)
    d_dlambda: dict                         # candidate index -> (3, 3)


def _wrench_cols(frame: ContactFrame, arm: np.ndarray, sign: float) -> np.ndarray:
    """(3, 3) map from a candidate's force triple to a body wrench."""
    F = frame.rotation @ _SPLIT                      # (2, 3) world force per unit
    out = np.empty((3, 3))
    out[:2] = sign * F
    out[2] = sign * (arm[0] * F[1] - arm[1] * F[0])  # cross(arm, F)
    return out


def balance_residual(world: World, body: Body, q: np.ndarray, forces: np.ndarray,
                     geoms=None) -> np.ndarray:
    """Net wrench on a free body: contact contributions plus constant wrench."""
    if geoms is None:
        geoms = evaluate_all(world, q)
    res = world.constant_wrench(body).copy()
    com = world.com_world(body, q)
    for g in geoms:
        sign = candidate_sign(g.candidate, body)
        if sign == 0.0:
            continue
        lam = np.asarray(forces[g.candidate.index], dtype=float)
        F = sign * (g.frame.rotation @ (_SPLIT @ lam))
        arm = g.frame.point - com
        res[:2] += F
        res[2] += cross2(arm, F)
    return res


def linearize_balance(world: World, body: Body, q: np.ndarray, forces: np.ndarray,
                      geoms=None) -> BalanceBlock:
    """First-order expansion of balance_residual in (dq, dlambda).

    d_dq accounts for the rotation of movable surfaces, for the motion of
    the contact points, and for the motion of the body's own center of
    mass. Surfaces on static bodies contribute nothing.
    """
    if geoms is None:
        geoms = evaluate_all(world, q)
    n_q = world.n_q
    res = world.constant_wrench(body).copy()
    d_dq = np.zeros((3, n_q))
    d_dlam = {}
    com = world.com_world(body, q)
    body_cols = world.cols(body)
    pose_b = world.pose(body, q)
    dcom = np.zeros((2, n_q))
    if body_cols is not None:
        dcom[:, body_cols] = point_jacobian(pose_b, body.com_vec())

    for g in geoms:
        cand = g.candidate
        sign = candidate_sign(cand, body)
        if sign == 0.0:
            continue
        lam = np.asarray(forces[cand.index], dtype=float)
        f_tn = _SPLIT @ lam                      # (tangential, normal)
        F = sign * (g.frame.rotation @ f_tn)
        arm = g.frame.point - com
        res[:2] += F
        res[2] += cross2(arm, F)
        d_dlam[cand.index] = _wrench_cols(g.frame, arm, sign)

        # dF/dq: frame rotates only with a movable surface body.
        cs = world.cols(cand.surface_body)
        dF = np.zeros((2, n_q))
        if cs is not None:
            pose_s = world.pose(cand.surface_body, q)
            dR = drot(pose_s.theta)
            dF[:, cs.start + 2] = sign * (dR @ (cand.surface.tangent_vec() * f_tn[0]
                                                + cand.surface.normal_vec() * f_tn[1]))
        darm = g.point_jac - dcom
        d_dq[:2] += dF
        d_dq[2] += arm[0] * dF[1] - arm[1] * dF[0]
        d_dq[2] += darm[0] * F[1] - darm[1] * F[0]

    return BalanceBlock(residual=res, d_dq=d_dq, d_dlambda=d_dlam)


# ---------------------------------------------------------------------------
# Complementarity pairs


@dataclass
class AffineExpr:
    """Affine expression in one candidate's local unknowns plus dq.

    Coefficients refer to the step variables: dq (configuration change),
    dlam (this candidate's force change), slip (its slip-bound variable)
    and slack (its relaxation slack).
    """

    dq: np.ndarray
    dlam: np.ndarray
    slip: float
    slack: float
    const: float

    @staticmethod
    def zero(n_q: int) -> "AffineExpr":
        return AffineExpr(np.zeros(n_q), np.zeros(3), 0.0, 0.0, 0.0)


@dataclass
class CompPair:
    """One complementarity pair: 0 <= left  perp  right >= 0."""

    left: AffineExpr
    right: AffineExpr


def complementarity_rows(geom: CandidateGeometry, force: np.ndarray,
                         gap_offset: float = 0.0, slip_offset: float = 0.0):
    """The four linearized complementarity pairs of one candidate.

    Written at the quasistatic expansion point (current velocity zero), so
    the tangential terms contain only the Jacobian part. gap_offset and
    slip_offset shift the right-hand sides; the simulator uses them for
    penetration restoration and accumulated slip, the controller leaves
    them at zero.
    """
    n_q = geom.phi_jac.shape[0]
    lam = np.asarray(force, dtype=float)
    mu = geom.candidate.mu

    def expr(dq=None, dlam=None, slip=0.0, const=0.0):
        e = AffineExpr.zero(n_q)
        if dq is not None:
            e.dq = dq.copy()
        if dlam is not None:
            e.dlam = np.asarray(dlam, dtype=float)
        e.slip = slip
        e.const = const
        return e

    normal = CompPair(
        left=expr(dlam=(0, 0, 1), const=lam[2]),
        right=expr(dq=geom.phi_jac, const=geom.phi + gap_offset),
    )
    slide_pos = CompPair(
        left=expr(dlam=(1, 0, 0), const=lam[0]),
        right=expr(dq=geom.psi_jac, slip=1.0, const=slip_offset),
    )
    slide_neg = CompPair(
        left=expr(dlam=(0, 1, 0), const=lam[1]),
        right=expr(dq=-geom.psi_jac, slip=1.0, const=-slip_offset),
    )
    cone = CompPair(
        left=expr(slip=1.0),
        right=expr(dlam=(-1.0, -1.0, mu), const=mu * lam[2] - lam[0] - lam[1]),
    )
    return [normal, slide_pos, slide_neg, cone]


def relax_rows(rows):
    """Add the candidate's shared slack to both sides of each pair."""
    out = []
    for pair in rows:
        left = replace(pair.left, dq=pair.left.dq.copy(), dlam=pair.left.dlam.copy(), slack=1.0)
        right = replace(pair.right, dq=pair.right.dq.copy(), dlam=pair.right.dlam.copy(), slack=1.0)
        out.append(CompPair(left=left, right=right))
    return out
