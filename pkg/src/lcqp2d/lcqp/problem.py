"""Problem and solution containers for QPs with linear complementarity pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

SOLVED = "solved"
MAX_PENALTY = "max_penalty_reached"
SUBPROBLEM_FAILURE = "subproblem_failure"
INFEASIBLE = "infeasible"


@dataclass
class LcqpProblem:
    """min 1/2 x'Qx + g'x  subject to

        A x + b = 0,   C x + d >= 0,   lb <= x <= ub,
        0 <= L_j x + l_j  perp  R_j x + r_j >= 0   for each pair j.

    Q must be symmetric positive semidefinite. Infinite bounds are allowed.
    """

    Q: np.ndarray
    g: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    C: np.ndarray = None
    d: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None
    L: np.ndarray = None
    l: np.ndarray = None
    R: np.ndarray = None
    r: np.ndarray = None

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        n = self.g.shape[0]
        if self.Q.shape != (n, n):
            raise ValueError("Q/g dimension mismatch")
        self.A = _mat(self.A, n)
        self.b = _vec(self.b, self.A.shape[0], "b")
        self.C = _mat(self.C, n)
        self.d = _vec(self.d, self.C.shape[0], "d")
        self.lb = np.full(n, -math.inf) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(n, math.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bound dimension mismatch")
        self.L = _mat(self.L, n)
        self.l = _vec(self.l, self.L.shape[0], "l")
        self.R = _mat(self.R, n)
        self.r = _vec(self.r, self.R.shape[0], "r")
        if self.R.shape[0] != self.L.shape[0]:
            raise ValueError("complementarity pair sides disagree in count")

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.L.shape[0]

    def validate(self, tol: float = 1e-10):
        sym = 0.5 * (self.Q + self.Q.T)
        if self.Q.size and np.max(np.abs(self.Q - sym)) > 1e-9 * (1.0 + np.max(np.abs(self.Q))):
            raise ValueError("Q is not symmetric")
        if sym.size:
            w = np.linalg.eigvalsh(sym)
            if w.min() < -tol * max(1.0, w.max(), 0.0):
                raise ValueError(f"Q is not positive semidefinite (min eig {w.min():.3e})")
        if np.any(self.lb > self.ub):
            raise ValueError("inconsistent bounds (lb > ub)")

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.Q @ x + self.g @ x)

    def pair_values(self, x: np.ndarray):
        return self.L @ x + self.l, self.R @ x + self.r

    def comp_residual(self, x: np.ndarray) -> float:
        """max_j |min(left_j, right_j)|, scaled by 1 + |x|_inf.

        Covers both a nonzero product (both sides positive) and a negative
        side, since the min picks up either violation.
        """
        if self.n_pairs == 0:
            return 0.0
        left, right = self.pair_values(x)
        raw = float(np.max(np.abs(np.minimum(left, right))))
        return raw / (1.0 + float(np.max(np.abs(x))))

    def feasibility_residual(self, x: np.ndarray) -> float:
        scale = 1.0 + float(np.max(np.abs(x))) if x.size else 1.0
        worst = 0.0
        if self.A.shape[0]:
            worst = max(worst, float(np.max(np.abs(self.A @ x + self.b))))
        if self.C.shape[0]:
            worst = max(worst, float(np.max(np.maximum(0.0, -(self.C @ x + self.d)))))
        if self.n_pairs:
            left, right = self.pair_values(x)
            worst = max(worst, float(np.max(np.maximum(0.0, -left))),
                        float(np.max(np.maximum(0.0, -right))))
        finite_lb = np.isfinite(self.lb)
        finite_ub = np.isfinite(self.ub)
        if finite_lb.any():
            worst = max(worst, float(np.max(np.maximum(0.0, self.lb[finite_lb] - x[finite_lb]))))
        if finite_ub.any():
            worst = max(worst, float(np.max(np.maximum(0.0, x[finite_ub] - self.ub[finite_ub]))))
        return worst / scale


def _mat(M, n):
    if M is None:
        return np.zeros((0, n))
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[1] != n:
        raise ValueError("matrix has wrong shape")
    return M


def _vec(v, m, name):
    if v is None:
        if m:
            raise ValueError(f"{name} missing")
        return np.zeros(0)
    v = np.asarray(v, dtype=float)
    if v.shape != (m,):
        raise ValueError(f"{name} has wrong shape")
    return v


@dataclass
class LcqpSolution:
    """Solution of an LcqpProblem with residual diagnostics."""

    x: np.ndarray
    objective: float
    comp_residual: float
    kkt_residual: float
    feas_residual: float
    status: str
    iterations: int = 0
    rho_final: float = 0.0
    branch: Optional[np.ndarray] = None

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


@dataclass
class SolverOptions:
    """Tunable tolerances of the penalty homotopy solver."""

    eps_comp: float = 1e-8
    eps_kkt: float = 1e-6
    eps_feas: float = 1e-8
    rho_init_scale: float = 0.01
    rho_growth: float = 10.0
    rho_max_scale: float = 1e8
    max_outer: int = 25
    warm_start: bool = True
    branch_enum_pairs: int = 0    # widest undecided-pair set the rescue may search
    branch_enum_solves: int = 96  # work cap on rescue subproblem solves
