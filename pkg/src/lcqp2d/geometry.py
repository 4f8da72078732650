"""Planar rigid-body kinematics: poses, shapes, contact surfaces and frames.

Everything in this module is a pure function over immutable values; no state
is shared between calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

INF = math.inf


def rot(theta: float) -> np.ndarray:
    """2x2 rotation matrix."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def drot(theta: float) -> np.ndarray:
    """Derivative of rot(theta) with respect to theta."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[-s, -c], [c, -s]])


def perp(v) -> np.ndarray:
    """Rotate a 2-vector by +90 degrees: (x, y) -> (-y, x)."""
    return np.array([-v[1], v[0]])


def cross2(a, b) -> float:
    """Scalar cross product of two 2-vectors."""
    return a[0] * b[1] - a[1] * b[0]


def tangent_of(normal) -> np.ndarray:
    """Surface tangent chosen so that [tangent | normal] has determinant +1."""
    return np.array([normal[1], -normal[0]])


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@dataclass(frozen=True)
class Pose2:
    """Planar pose. theta is stored unwrapped; trig is evaluated directly."""

    x: float
    y: float
    theta: float

    def origin(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def rotation(self) -> np.ndarray:
        return rot(self.theta)

    def to_world(self, local) -> np.ndarray:
        return self.rotation() @ np.asarray(local, dtype=float) + self.origin()

    def to_local(self, world) -> np.ndarray:
        return self.rotation().T @ (np.asarray(world, dtype=float) - self.origin())

    @staticmethod
    def from_vec(v) -> "Pose2":
        return Pose2(float(v[0]), float(v[1]), float(v[2]))

    def as_vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


def world_point(pose: Pose2, local) -> np.ndarray:
    """Map a body-frame point to world coordinates."""
    return pose.to_world(local)


def point_jacobian(pose: Pose2, local) -> np.ndarray:
    """d(world point)/d(x, y, theta) of the owning body, shape (2, 3)."""
    out = np.empty((2, 3))
    out[:, 0] = (1.0, 0.0)
    out[:, 1] = (0.0, 1.0)
    out[:, 2] = drot(pose.theta) @ np.asarray(local, dtype=float)
    return out


@dataclass(frozen=True)
class Surface:
    """A contact surface: a line in body frame plus a validity window.

    The line is {p : normal . p = offset} with a unit, outward-pointing
    normal. Distances use the infinite line; the window [t_lo, t_hi] along
    the tangent direction (plus margin) decides whether a candidate touching
    this surface is considered live at a given configuration.
    """

    normal: tuple
    offset: float
    t_lo: float = -INF
    t_hi: float = INF
    margin: float = 0.02

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError(f"surface normal must be unit length, got {n}")

    def normal_vec(self) -> np.ndarray:
        return np.asarray(self.normal, dtype=float)

    def tangent_vec(self) -> np.ndarray:
        return tangent_of(self.normal)

    def contains_tangent(self, t_coord: float) -> bool:
        return (self.t_lo - self.margin) <= t_coord <= (self.t_hi + self.margin)


@dataclass(frozen=True)
class BoxShape:
    """Axis-aligned rectangle in body frame, centered at the body origin."""

    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("box dimensions must be strictly positive")

    def corners(self) -> list:
        """Corner points, counterclockwise from (+w/2, +h/2)."""
        w, h = self.width / 2.0, self.height / 2.0
        return [np.array(c) for c in ((w, h), (-w, h), (-w, -h), (w, -h))]

    def face(self, name: str) -> Surface:
        """Face surface by outward normal name: '+x', '-x', '+y' or '-y'."""
        w, h = self.width / 2.0, self.height / 2.0
        table = {
            "+x": ((1.0, 0.0), w, h),
            "-x": ((-1.0, 0.0), w, h),
            "+y": ((0.0, 1.0), h, w),
            "-y": ((0.0, -1.0), h, w),
        }
        if name not in table:
            raise ValueError(f"unknown box face {name!r}")
        normal, offset, half_len = table[name]
        return Surface(normal=normal, offset=offset, t_lo=-half_len, t_hi=half_len)


@dataclass(frozen=True)
class DiskShape:
    """Disk centered at the body origin."""

    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disk radius must be strictly positive")


@dataclass(frozen=True)
class HalfPlaneShape:
    """Fixed environment half-plane; material fills {p : normal . p <= offset}."""

    normal: tuple
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("half-plane normal must be unit length")

    def surface(self, t_lo: float = -INF, t_hi: float = INF) -> Surface:
        return Surface(normal=self.normal, offset=self.offset, t_lo=t_lo, t_hi=t_hi)


BodyShape = Union[BoxShape, DiskShape, HalfPlaneShape]


@dataclass(frozen=True)
class ContactFrame:
    """Contact frame of one candidate at one configuration.

    rotation columns are the world-frame surface tangent and normal, so a
    force (f_tangent, f_normal) maps to world coordinates as rotation @ f.
    arm is the contact point relative to the reference object's center of
    mass (zeros when the candidate touches no movable object).
    """

    rotation: np.ndarray
    point: np.ndarray
    arm: np.ndarray

    @property
    def tangent(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def normal(self) -> np.ndarray:
        return self.rotation[:, 1]

    @property
    def arm_perp(self) -> np.ndarray:
        return perp(self.arm)


def surface_world(pose: Pose2, surface: Surface):
    """World-frame (normal, tangent, line offset) of a body surface."""
    R = pose.rotation()
    n_w = R @ surface.normal_vec()
    t_w = R @ surface.tangent_vec()
    offset_w = float(n_w @ (pose.origin() + R @ (surface.normal_vec() * surface.offset)))
    return n_w, t_w, offset_w
