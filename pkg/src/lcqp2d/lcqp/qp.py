"""Convex QP interface: feasibility phase, active-set solve, then polish.

The hot iteration lives in a kernel (compiled when available, numpy
otherwise; see backend.py). This wrapper owns everything around it:
stacking the constraints into the kernel's row form, symmetric diagonal
scaling, finding a feasible start (elastic exact-penalty phase 1),
regularizing a semidefinite Hessian, polishing the final active set
against the unregularized problem, and reporting scaled KKT residuals.
Primal infeasibility is reported distinctly from numerical failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
FAILURE = "failure"

_TOL_ACTIVE = 1e-9
_FEAS_TOL = 1e-8


@dataclass
class QpResult:
    x: np.ndarray
    status: str
    objective: float = math.inf
    kkt_residual: float = math.inf
    working_rows: list = field(default_factory=list)
    multipliers: np.ndarray = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class ConvexQp:
    """A dense convex QP with fixed constraints and a swappable linear term.

    minimize 1/2 x'Qx + g'x
    s.t.     A x + b = 0,  C x + d >= 0,  lb <= x <= ub

    Building the row structure once lets a penalty loop re-solve with new
    linear terms and warm-started working sets cheaply. Components where
    lb == ub become equality rows.
    """

    def __init__(self, Q, A=None, b=None, C=None, d=None, lb=None, ub=None):
        self.Q = np.asarray(Q, dtype=float)
        n = self.Q.shape[0]
        self.n = n
        A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=float)
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
        C = np.zeros((0, n)) if C is None else np.asarray(C, dtype=float)
        d = np.zeros(C.shape[0]) if d is None else np.asarray(d, dtype=float)
        lb = np.full(n, -math.inf) if lb is None else np.asarray(lb, dtype=float)
        ub = np.full(n, math.inf) if ub is None else np.asarray(ub, dtype=float)
        if np.any(lb > ub):
            raise ValueError("inconsistent bounds (lb > ub)")
        self.lb, self.ub = lb, ub

        fixed = np.isfinite(lb) & (lb == ub)
        blocks_m = [A]
        blocks_v = [-b]
        if fixed.any():
            E = np.zeros((int(fixed.sum()), n))
            E[np.arange(E.shape[0]), np.nonzero(fixed)[0]] = 1.0
            blocks_m.append(E)
            blocks_v.append(lb[fixed])
        n_eq = sum(bm.shape[0] for bm in blocks_m)

        lo = np.isfinite(lb) & ~fixed
        hi = np.isfinite(ub) & ~fixed
        I_lo = np.zeros((int(lo.sum()), n))
        I_lo[np.arange(I_lo.shape[0]), np.nonzero(lo)[0]] = 1.0
        I_hi = np.zeros((int(hi.sum()), n))
        I_hi[np.arange(I_hi.shape[0]), np.nonzero(hi)[0]] = -1.0
        blocks_m += [C, I_lo, I_hi]
        blocks_v += [-d, lb[lo], -ub[hi]]

        self.rows = np.ascontiguousarray(np.vstack(blocks_m))
        self.rhs = np.concatenate(blocks_v)
        self.m = self.rows.shape[0]
        self.n_eq = n_eq
        self.is_eq = np.zeros(self.m, dtype=bool)
        self.is_eq[:n_eq] = True

        # Symmetric diagonal scaling x = D z keeps the kernel Hessian
        # near unit diagonal; zero-curvature directions get the floor.
        qdiag = np.abs(np.diag(self.Q))
        top = float(qdiag.max()) if n else 0.0
        if top <= 0.0:
            self.D = np.ones(n)
        else:
            self.D = 1.0 / np.sqrt(np.maximum(qdiag, 1e-8 * top))
        self.Qs = (self.Q * self.D).T * self.D
        # Row equilibration: unit-norm rows keep the working-set Gram
        # matrix well conditioned regardless of the constraint mix.
        rows_s = self.rows * self.D
        norms = np.sqrt(np.sum(rows_s * rows_s, axis=1))
        self.row_norm = np.where(norms > 0.0, norms, 1.0)
        self.rows_s = np.ascontiguousarray(rows_s / self.row_norm[:, None])
        self.rhs_s = self.rhs / self.row_norm
        # Per-variable Tikhonov floor keeps the kernel Hessian positive
        # definite; the polish step removes the bias afterwards.
        self.Hs = self.Qs + np.diag(np.full(n, 1e-9) + 1e-9 * np.abs(np.diag(self.Qs)))
        self._row_scale = 1.0 + float(np.max(np.abs(self.rows_s), initial=0.0))

    # -- public ------------------------------------------------------------

    def solve(self, g, x0=None, warm_rows=(), polish=True) -> QpResult:
        g = np.asarray(g, dtype=float)
        x0 = np.zeros(self.n) if x0 is None else np.array(x0, dtype=float)
        x0 = np.clip(x0, self.lb, self.ub)

        phase1_iters = 0
        scale0 = 1.0 + float(np.max(np.abs(x0), initial=0.0))
        if self._violation(x0) > 1e-6 * scale0:
            # Dust-level violations heal inside the kernel (the violated
            # rows are seeded into the working set); anything larger goes
            # through the elastic restoration, with an LP fallback for
            # the degenerate cases the active-set iteration dislikes.
            x0, status, phase1_iters = self._phase1(x0)
            if status == FAILURE:
                x0, status = self._phase1_lp(x0)
            if status is not None:
                return QpResult(x=x0, status=status, iterations=phase1_iters)
            warm_rows = self._active_rows(x0)

        res = self._kernel_pass(g, x0, warm_rows, polish)
        res.iterations += phase1_iters
        if res.status == OPTIMAL:
            scale = 1.0 + float(np.max(np.abs(res.x), initial=0.0))
            if self._violation(res.x) > 1e-8 * scale:
                res = QpResult(x=res.x, status=FAILURE, iterations=res.iterations)
        return res

    def _kernel_pass(self, g, x0, warm_rows, polish) -> QpResult:
        if self.m:
            resid = self.rows @ x0 - self.rhs
            tol = _TOL_ACTIVE * (1.0 + float(np.max(np.abs(x0), initial=0.0)))
            violated = [int(i) for i in np.nonzero((resid < -tol) & ~self.is_eq)[0]]
            keep = set(violated)
            warm = violated + [int(i) for i in warm_rows
                               if int(i) not in keep and not self.is_eq[i]
                               and abs(float(resid[i])) <= tol]
            warm = warm[: max(0, self.n - self.n_eq)]
        else:
            warm = []
        z0 = x0 / self.D
        gs = g * self.D
        # A healthy solve needs far fewer iterations than this; beyond it
        # the iteration is pathological and failing fast lets the caller's
        # retry ladder take over.
        max_iter = 150 + 2 * (self.n + self.m)
        code, z, work, nu, iters = backend.kernel().asqp_kernel(
            self.Hs, gs, self.rows_s, self.rhs_s, self.is_eq, z0, warm, max_iter)
        x = z * self.D
        if code != 0:
            return QpResult(x=x, status=FAILURE, iterations=iters)
        nu = np.asarray(nu, dtype=float)
        if len(work):
            nu = nu / self.row_norm[np.array(work)]
        if polish:
            x, work, nu = self._polish(g, x, list(work), nu)
        kkt = self.kkt_residual(g, x, work, nu)
        obj = float(0.5 * x @ self.Q @ x + g @ x)
        return QpResult(x=x, status=OPTIMAL, objective=obj, kkt_residual=kkt,
                        working_rows=list(work), multipliers=nu, iterations=iters)

    def kkt_residual(self, g, x, work, nu) -> float:
        """Scaled stationarity plus feasibility violation of a candidate point."""
        grad = self.Q @ x + g
        resid = grad.copy()
        if len(work):
            resid -= self.rows[np.array(work)].T @ np.asarray(nu, dtype=float)
        scale = 1.0 + float(np.max(np.abs(grad), initial=0.0))
        r = float(np.max(np.abs(resid), initial=0.0))
        viol = self._violation(x)
        return max(r / scale, viol / (1.0 + float(np.max(np.abs(x), initial=0.0))))

    # -- internals ----------------------------------------------------------

    def _violation(self, x) -> float:
        if not self.m:
            return 0.0
        res = self.rows @ x - self.rhs
        worst = float(np.max(np.abs(res[self.is_eq]), initial=0.0))
        return max(worst, float(np.max(np.maximum(0.0, -res[~self.is_eq]), initial=0.0)))

    def _is_feasible(self, x, tol) -> bool:
        return self._violation(x) <= tol

    def _restore_equalities(self, x):
        """Minimum-norm correction onto the equality manifold.

        Starting the kernel on the manifold keeps every blocking row
        linearly independent of the working set, which the active-set
        iteration relies on.
        """
        if not self.n_eq:
            return x
        E = self.rows[self.is_eq]
        r = self.rhs[self.is_eq] - E @ x
        if float(np.max(np.abs(r), initial=0.0)) <= 1e-12 * (
                1.0 + float(np.max(np.abs(x), initial=0.0))):
            return x
        dz = np.linalg.lstsq(E, r, rcond=None)[0]
        return x + dz

    def _active_rows(self, x):
        if not self.m:
            return []
        res = np.abs(self.rows @ x - self.rhs)
        tol = _TOL_ACTIVE * (1.0 + float(np.max(np.abs(x), initial=0.0)))
        out = [int(i) for i in np.nonzero((res <= tol) & ~self.is_eq)[0]]
        return out[: max(0, self.n - self.n_eq)]

    def _phase1(self, x0, elastic_all=False):
        """Exact-penalty elastic feasibility restoration.

        Violated inequality rows (or, in the fallback, every inequality
        row) receive a nonnegative slack with linear cost tau; equalities
        stay exact. Above the exact-penalty threshold the slacks vanish
        iff the problem is feasible; tau grows over a few rounds before
        giving up. Returns (x, None, iters) on success, (x, status, iters)
        otherwise.
        """
        eq_rows = np.nonzero(self.is_eq)[0]
        ineq = np.nonzero(~self.is_eq)[0]
        n = self.n

        if len(eq_rows):
            E = self.rows[eq_rows]
            e = self.rhs[eq_rows]
            x0 = self._restore_equalities(x0)
            eq_gap = float(np.max(np.abs(E @ x0 - e), initial=0.0))
            if eq_gap > _FEAS_TOL * (1.0 + float(np.max(np.abs(x0), initial=0.0))):
                return x0, INFEASIBLE, 0

        resid = self.rows @ x0 - self.rhs if self.m else np.zeros(0)
        if elastic_all:
            elastic = [int(i) for i in ineq]
        else:
            elastic = [int(i) for i in ineq if resid[i] < _TOL_ACTIVE]
        k = len(elastic)

        nz = n + k
        H1 = np.eye(nz)
        rows1 = np.zeros((len(eq_rows) + len(ineq) + k, nz))
        rhs1 = np.zeros(rows1.shape[0])
        is_eq1 = np.zeros(rows1.shape[0], dtype=bool)
        rows1[: len(eq_rows), :n] = self.rows[eq_rows]
        rhs1[: len(eq_rows)] = self.rhs[eq_rows]
        is_eq1[: len(eq_rows)] = True
        rows1[len(eq_rows): len(eq_rows) + len(ineq), :n] = self.rows[ineq]
        rhs1[len(eq_rows): len(eq_rows) + len(ineq)] = self.rhs[ineq]
        pos = {int(r): j for j, r in enumerate(ineq)}
        for j, i in enumerate(elastic):
            rows1[len(eq_rows) + pos[i], n + j] = 1.0
            rows1[len(eq_rows) + len(ineq) + j, n + j] = 1.0     # t_j >= 0

        z = np.zeros(nz)
        z[:n] = x0
        for j, i in enumerate(elastic):
            z[n + j] = max(-resid[i], 0.0) + 1e-12
        scale_x = 1.0 + float(np.max(np.abs(x0), initial=0.0))
        tau = 10.0 * scale_x
        total = 0
        warm1 = []
        if rows1.shape[0]:
            res1 = rows1 @ z - rhs1
            tol1 = _TOL_ACTIVE * (1.0 + float(np.max(np.abs(z), initial=0.0)))
            warm1 = [int(i) for i in np.nonzero((np.abs(res1) <= tol1) & ~is_eq1)[0]]
            warm1 = warm1[: max(0, nz - int(is_eq1.sum()))]
        for _ in range(4):
            g1 = np.concatenate([-x0, np.full(k, tau)])
            max_iter = 100 + 10 * (nz + rows1.shape[0])
            code, z, _, _, iters = backend.kernel().asqp_kernel(
                H1, g1, rows1, rhs1, is_eq1, z, warm1, max_iter)
            total += iters
            if code != 0:
                return x0, FAILURE, total
            x = z[:n]
            if self._violation(x) <= _FEAS_TOL * (1.0 + float(np.max(np.abs(x), initial=0.0))):
                return x, None, total
            tau *= 100.0
        return z[:n], INFEASIBLE, total

    def _phase1_lp(self, x0):
        """Feasibility restoration as an elastic linear program.

        minimize sum(t) over (x, t >= 0) with rows[i].x + t_i >= rhs_i for
        inequality rows and exact equality rows. Solved by linprog (HiGHS),
        which is immune to the degenerate-vertex churn that can stall the
        active-set kernel; used only when that kernel gives up.
        """
        from scipy.optimize import linprog

        n = self.n
        ineq = np.nonzero(~self.is_eq)[0]
        mi = len(ineq)
        c = np.concatenate([np.zeros(n), np.ones(mi)])
        A_ub = np.zeros((mi, n + mi))
        A_ub[:, :n] = -self.rows[ineq]
        A_ub[np.arange(mi), n + np.arange(mi)] = -1.0
        b_ub = -self.rhs[ineq]
        eq_rows = np.nonzero(self.is_eq)[0]
        A_eq = b_eq = None
        if len(eq_rows):
            A_eq = np.zeros((len(eq_rows), n + mi))
            A_eq[:, :n] = self.rows[eq_rows]
            b_eq = self.rhs[eq_rows]
        span = 10.0 * (1.0 + float(np.max(np.abs(x0), initial=0.0)))
        bounds = [(max(self.lb[j], x0[j] - span), min(self.ub[j], x0[j] + span))
                  for j in range(n)]
        bounds += [(0.0, None)] * mi
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=bounds, method="highs")
        if not res.success:
            return x0, INFEASIBLE
        x = res.x[:n]
        if self._violation(x) > _FEAS_TOL * (1.0 + float(np.max(np.abs(x), initial=0.0))):
            return x, INFEASIBLE
        return x, None

    def _polish(self, g, x, work, nu):
        """Re-solve the KKT system of the final active set without the
        Hessian regularization; keep the result only if it is consistent.

        The working set is extended with any other rows active at x so a
        stall exit that left active rows out of the set still obtains a
        complete multiplier certificate. If moving the point would break
        feasibility or multiplier signs, the multipliers alone may still
        be refreshed.
        """
        base = self.kkt_residual(g, x, work, nu)
        work_ext = list(work)
        if self.m:
            res = self.rows @ x - self.rhs
            tol = _TOL_ACTIVE * (1.0 + float(np.max(np.abs(x), initial=0.0)))
            known = set(int(i) for i in work_ext)
            for i in np.nonzero((np.abs(res) <= tol) & ~self.is_eq)[0]:
                if int(i) not in known:
                    work_ext.append(int(i))
        if not len(work_ext):
            try:
                x_new = np.linalg.lstsq(self.Q, -g, rcond=None)[0]
            except np.linalg.LinAlgError:
                return x, work, nu
            if (self._violation(x_new) <= 1e-10 * (1.0 + float(np.max(np.abs(x_new))))
                    and self.kkt_residual(g, x_new, work, nu) <= base):
                return x_new, work, nu
            return x, work, nu
        w_arr = np.array(work_ext)
        Aw = self.rows[w_arr]
        w = len(work_ext)
        kkt = np.zeros((self.n + w, self.n + w))
        kkt[: self.n, : self.n] = self.Q
        kkt[: self.n, self.n:] = -Aw.T
        kkt[self.n:, : self.n] = Aw
        rhs = np.concatenate([-g, self.rhs[w_arr]])
        try:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        except np.linalg.LinAlgError:
            return x, work, nu
        x_new, nu_new = sol[: self.n], sol[self.n:]
        scale = 1.0 + float(np.max(np.abs(x_new), initial=0.0))
        ok = self._violation(x_new) <= 1e-9 * scale
        if ok:
            ineq = ~self.is_eq[w_arr]
            ok = not ineq.any() or float(np.min(nu_new[ineq])) >= -1e-7 * (
                1.0 + float(np.max(np.abs(nu_new))))
        if ok and self.kkt_residual(g, x_new, work_ext, nu_new) <= base:
            return x_new, work_ext, nu_new
        # Multiplier-only refresh at the unchanged point.
        nu_fix = np.linalg.lstsq(Aw.T, self.Q @ x + g, rcond=None)[0]
        if self.kkt_residual(g, x, work_ext, nu_fix) <= base:
            return x, work_ext, nu_fix
        return x, work, nu


def solve_convex_qp(Q, g, A=None, b=None, C=None, d=None, lb=None, ub=None,
                    x0=None) -> QpResult:
    """One-shot convex QP solve; see ConvexQp for the problem form."""
    return ConvexQp(Q, A=A, b=b, C=C, d=d, lb=lb, ub=ub).solve(g, x0=x0)
