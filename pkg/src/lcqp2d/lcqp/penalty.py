"""Penalty homotopy for QPs with linear complementarity pairs.

Each pair contributes a bilinear violation (L_j x + l_j)(R_j x + r_j) that
is penalized with a growing weight rho and linearized at the current
iterate, so every subproblem is a convex QP over the original linear
constraints plus pair-side nonnegativity. When the complementarity residual
is driven below tolerance, one final convex solve with the implied branch
pinned to equality sharpens the products to solver precision.

Deterministic: identical problems and options produce the identical
iterate sequence.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .problem import (
    INFEASIBLE,
    MAX_PENALTY,
    SOLVED,
    SUBPROBLEM_FAILURE,
    LcqpProblem,
    LcqpSolution,
    SolverOptions,
)
from . import qp as qpmod


def _pair_structure(problem: LcqpProblem) -> qpmod.ConvexQp:
    C_ext = np.vstack([problem.C, problem.L, problem.R])
    d_ext = np.concatenate([problem.d, problem.l, problem.r])
    return qpmod.ConvexQp(problem.Q, A=problem.A, b=problem.b,
                          C=C_ext, d=d_ext, lb=problem.lb, ub=problem.ub)


def _branch_qp(problem: LcqpProblem, branch: np.ndarray) -> qpmod.ConvexQp:
    """Convex QP with pair sides pinned to zero per the branch code.

    branch[j]: 0 pins the left side, 1 pins the right side, and -1 leaves
    the pair unpinned (both sides stay plain inequalities).
    """
    pin_left = branch == 0
    pin_right = branch == 1
    free = ~pin_left & ~pin_right
    A_ext = np.vstack([problem.A, problem.L[pin_left], problem.R[pin_right]])
    b_ext = np.concatenate([problem.b, problem.l[pin_left], problem.r[pin_right]])
    C_ext = np.vstack([problem.C, problem.L[~pin_left], problem.R[~pin_right]])
    d_ext = np.concatenate([problem.d, problem.l[~pin_left], problem.r[~pin_right]])
    return qpmod.ConvexQp(problem.Q, A=A_ext, b=b_ext, C=C_ext, d=d_ext,
                          lb=problem.lb, ub=problem.ub)


def implied_branch(problem: LcqpProblem, x: np.ndarray) -> np.ndarray:
    """0 where the left side is the smaller one (to be pinned), else 1."""
    left, right = problem.pair_values(x)
    return (right < left).astype(np.int8)


def _decided_branch(problem: LcqpProblem, x: np.ndarray) -> np.ndarray:
    """Like implied_branch but -1 where both sides are too close to call.

    Degenerate pairs (both sides near zero) must not be pinned from a
    noisy iterate; committing them to the wrong side makes the branch QP
    infeasible even though the LCQP is solvable.
    """
    left, right = problem.pair_values(x)
    out = (right < left).astype(np.int8)
    tol = 1e-6 * (1.0 + np.abs(left) + np.abs(right))
    out[np.abs(left - right) <= tol] = -1
    return out


def solve(problem: LcqpProblem, options: SolverOptions = None,
          x0: np.ndarray = None) -> LcqpSolution:
    """Find a stationary point of the LCQP; see module docstring.

    Statuses: solved; infeasible (the linear constraints plus pair-side
    nonnegativity admit no point); max_penalty_reached (complementarity
    unresolved at the penalty cap); subproblem_failure (inner QP broke
    down). The best iterate is always returned.

    A homotopy that starts too soft around a warm start can settle into a
    spurious basin, so a failed attempt is deterministically retried with
    a stiffer initial penalty and finally from a cold start.
    """
    opts = options or SolverOptions()
    first = _solve_once(problem, opts, x0)
    if first.status in (SOLVED, INFEASIBLE):
        return first
    total = first.iterations
    stiff = replace(opts, rho_init_scale=max(1.0, opts.rho_init_scale * 1e4))
    soft = replace(opts, rho_init_scale=min(0.01, opts.rho_init_scale))
    for retry_opts, retry_x0 in ((stiff, x0), (soft, None), (stiff, None)):
        again = _solve_once(problem, retry_opts, retry_x0)
        total += again.iterations
        if again.status in (SOLVED, INFEASIBLE):
            again.iterations = total
            return again
    if opts.branch_enum_pairs > 0:
        x, kkt, branch = _enumeration_rescue(problem, first.x, first.kkt_residual, opts)
        if (branch is not None
                and problem.comp_residual(x) <= opts.eps_comp
                and problem.feasibility_residual(x) <= opts.eps_feas
                and kkt <= opts.eps_kkt):
            sol = _finish(problem, x, SOLVED, kkt, total, first.rho_final, branch)
            return sol
    first.iterations = total
    return first


def _solve_once(problem: LcqpProblem, opts: SolverOptions,
                x0: np.ndarray = None) -> LcqpSolution:
    n = problem.n
    Qs = 0.5 * (problem.Q + problem.Q.T)
    if np.max(np.abs(Qs - problem.Q), initial=0.0) > 0:
        problem = LcqpProblem(Q=Qs, g=problem.g, A=problem.A, b=problem.b,
                              C=problem.C, d=problem.d, lb=problem.lb, ub=problem.ub,
                              L=problem.L, l=problem.l, R=problem.R, r=problem.r)

    structure = _pair_structure(problem)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)

    if problem.n_pairs == 0:
        res = structure.solve(problem.g, x0=x)
        if res.status == qpmod.INFEASIBLE:
            return _finish(problem, res.x, INFEASIBLE, res.kkt_residual, 0, 0.0)
        if res.status == qpmod.FAILURE:
            return _finish(problem, res.x, SUBPROBLEM_FAILURE, res.kkt_residual, 0, 0.0)
        return _finish(problem, res.x, SOLVED, res.kkt_residual, res.iterations, 0.0)

    # Keyed to the typical objective curvature. The median diagonal is
    # robust against a dominant penalty block (relaxation slacks) that
    # would otherwise start the homotopy too stiff to explore branches,
    # and the floor keeps feasibility objectives from capping the weight.
    diag = np.abs(np.diag(problem.Q)) if problem.Q.size else np.zeros(0)
    q_scale = max(float(np.median(diag)) if diag.size else 0.0, 1.0)
    rho = opts.rho_init_scale * q_scale
    rho_max = opts.rho_max_scale * q_scale

    L, l, R, r = problem.L, problem.l, problem.R, problem.r
    work = ()
    total_iters = 0
    status = MAX_PENALTY
    best_x = None
    best_comp = np.inf
    kkt = np.inf
    stale = 0
    for outer in range(opts.max_outer):
        g_pen = problem.g + rho * (L.T @ (R @ x + r) + R.T @ (L @ x + l))
        res = structure.solve(g_pen, x0=x, warm_rows=work, polish=False)
        total_iters += res.iterations
        if res.status == qpmod.INFEASIBLE:
            return _finish(problem, x, INFEASIBLE, np.inf, total_iters, rho)
        if res.status == qpmod.FAILURE:
            status = SUBPROBLEM_FAILURE
            break
        step = float(np.max(np.abs(res.x - x), initial=0.0))
        x = res.x
        work = res.working_rows
        kkt = res.kkt_residual
        comp = problem.comp_residual(x)
        if comp < best_comp:
            best_comp = comp
            best_x = x.copy()
        if comp <= opts.eps_comp:
            status = SOLVED
            break
        if rho >= rho_max:
            stale += 1
            if stale >= 3 or step <= 1e-10 * (1.0 + float(np.max(np.abs(x), initial=0.0))):
                break
        rho = min(rho * opts.rho_growth, rho_max)

    if status != SOLVED and best_x is not None:
        x = best_x
    elif status == SOLVED:
        # The loop runs unpolished subproblems; one polished re-solve at
        # the converged point recovers a complete multiplier certificate
        # for the reported stationarity residual.
        res = structure.solve(g_pen, x0=x, warm_rows=work)
        total_iters += res.iterations
        if res.status == qpmod.OPTIMAL and problem.comp_residual(res.x) <= opts.eps_comp:
            x = res.x
            kkt = res.kkt_residual
    x, kkt, branch = _branch_polish(problem, x, kkt, opts,
                                    require_no_worse=(status == SOLVED))
    comp_ok = (problem.comp_residual(x) <= opts.eps_comp
               and problem.feasibility_residual(x) <= opts.eps_feas)
    if comp_ok and kkt > opts.eps_kkt:
        kkt = min(kkt, certificate_kkt(problem, x))
    if status == SOLVED:
        if not comp_ok or kkt > opts.eps_kkt:
            status = MAX_PENALTY
    elif status in (MAX_PENALTY, SUBPROBLEM_FAILURE):
        # A stalled iterate may still sit on a valid branch point; the
        # certificate either promotes it or changes nothing.
        if comp_ok and kkt <= opts.eps_kkt:
            status = SOLVED
    return _finish(problem, x, status, kkt, total_iters, rho, branch)


def _branch_polish(problem, x, kkt, opts, require_no_worse=True):
    """Sharpen an iterate by solving the convex piece it selects.

    Two stages: first pin only the clearly decided pairs and re-solve,
    which settles degenerate pairs onto a consistent side; then pin the
    full branch implied by that solution. When the iterate already solves
    the LCQP the polished point must not worsen the objective; a stalled
    iterate carries no such guarantee, so any valid branch point wins.
    """
    y = x
    if not require_no_worse:
        # Rescue path: settle degenerate pairs by first pinning only the
        # clearly decided ones.
        stage1 = _decided_branch(problem, x)
        res1 = _branch_qp(problem, stage1).solve(problem.g, x0=x)
        if res1.optimal:
            y = res1.x
    branch = implied_branch(problem, y)
    res = _branch_qp(problem, branch).solve(problem.g, x0=y)
    if not res.optimal:
        return x, kkt, None
    obj_tol = 1e-9 * (1.0 + abs(problem.objective(x)))
    if require_no_worse and problem.objective(res.x) > problem.objective(x) + obj_tol:
        return x, kkt, None
    if (problem.comp_residual(res.x) <= opts.eps_comp
            and problem.feasibility_residual(res.x) <= opts.eps_feas):
        return res.x, res.kkt_residual, branch
    return x, kkt, None


def _try_branches(problem, base, free_pairs, x, opts):
    """Enumerate assignments of free_pairs on top of base pins.

    Codes are visited nearest-first relative to the assignment the iterate
    implies (fewest flipped pairs first, then ascending code), and the
    first valid branch wins; the physical answer is almost always one or
    two flips away and any valid branch point is a legitimate stationary
    point.
    """
    left, right = problem.pair_values(x)
    implied = 0
    for j, pair in enumerate(free_pairs):
        if right[pair] < left[pair]:
            implied |= 1 << j
    codes = sorted(range(2 ** len(free_pairs)),
                   key=lambda c: (bin(c ^ implied).count("1"), c))
    codes = codes[:opts.branch_enum_solves]
    for code in codes:
        branch = base.copy()
        for j, pair in enumerate(free_pairs):
            branch[pair] = (code >> j) & 1
        res = _branch_qp(problem, branch).solve(problem.g, x0=x)
        if not res.optimal:
            continue
        if (problem.comp_residual(res.x) > opts.eps_comp
                or problem.feasibility_residual(res.x) > opts.eps_feas):
            continue
        return (problem.objective(res.x), res, branch)
    return None


def _enumeration_rescue(problem, x, kkt, opts):
    """Last resort for stalled iterates: targeted branch enumeration.

    First the clearly decided pairs are pinned and the leftovers stay
    free; if that solution still violates complementarity somewhere, the
    violating pairs (usually one or two) are enumerated while everything
    else keeps its pin state. Only when that fails does the full sweep
    over all undecided pairs run, bounded by 2**branch_enum_pairs solves.
    """
    base = _decided_branch(problem, x)
    res1 = _branch_qp(problem, base).solve(problem.g, x0=x)
    if res1.optimal and problem.feasibility_residual(res1.x) <= opts.eps_feas:
        left, right = problem.pair_values(res1.x)
        scale = 1.0 + float(np.max(np.abs(res1.x), initial=0.0))
        viol = np.nonzero(np.abs(np.minimum(left, right)) > opts.eps_comp * scale)[0]
        if len(viol) == 0:
            return res1.x, res1.kkt_residual, base
        if 0 < len(viol) <= opts.branch_enum_pairs:
            best = _try_branches(problem, base, list(viol), res1.x, opts)
            if best is not None:
                _, res, branch = best
                return res.x, res.kkt_residual, branch
    amb = list(np.nonzero(base < 0)[0])
    if len(amb) == 0 or len(amb) > opts.branch_enum_pairs:
        return x, kkt, None
    best = _try_branches(problem, base, amb, x, opts)
    if best is None:
        return x, kkt, None
    _, res, branch = best
    return res.x, res.kkt_residual, branch


def certificate_kkt(problem: LcqpProblem, x: np.ndarray) -> float:
    """Stationarity residual with the best admissible multipliers.

    Fits multipliers to the active constraints by nonnegative least
    squares (equalities and the sides of degenerate pairs enter with free
    sign); the norm of what remains of the objective gradient is the
    honest first-order residual at x, independent of whatever working-set
    bookkeeping produced the point.
    """
    from scipy.optimize import nnls

    grad = problem.Q @ x + problem.g
    scale = 1.0 + float(np.max(np.abs(grad), initial=0.0))
    tol = 1e-7 * (1.0 + float(np.max(np.abs(x), initial=0.0)))
    cols = []
    if problem.A.shape[0]:
        for row in problem.A:
            cols.append(row)
            cols.append(-row)
    if problem.C.shape[0]:
        res = problem.C @ x + problem.d
        for i in np.nonzero(res <= tol)[0]:
            cols.append(problem.C[i])
    for j, (lo, hi) in enumerate(zip(problem.lb, problem.ub)):
        if np.isfinite(lo) and x[j] - lo <= tol:
            e = np.zeros(problem.n)
            e[j] = 1.0
            cols.append(e)
        if np.isfinite(hi) and hi - x[j] <= tol:
            e = np.zeros(problem.n)
            e[j] = -1.0
            cols.append(e)
    if problem.n_pairs:
        left, right = problem.pair_values(x)
        for j in range(problem.n_pairs):
            both = left[j] <= tol and right[j] <= tol
            if left[j] <= tol:
                cols.append(problem.L[j])
                if both:
                    cols.append(-problem.L[j])
            if right[j] <= tol:
                cols.append(problem.R[j])
                if both:
                    cols.append(-problem.R[j])
    if not cols:
        return float(np.max(np.abs(grad), initial=0.0)) / scale
    M = np.column_stack(cols)
    try:
        _, rnorm = nnls(M, grad, maxiter=10 * M.shape[1])
    except RuntimeError:
        return float(np.max(np.abs(grad), initial=0.0)) / scale
    return float(rnorm) / scale


def _finish(problem, x, status, kkt, iters, rho, branch=None) -> LcqpSolution:
    return LcqpSolution(
        x=x,
        objective=problem.objective(x),
        comp_residual=problem.comp_residual(x),
        kkt_residual=float(kkt),
        feas_residual=problem.feasibility_residual(x),
        status=status,
        iterations=iters,
        rho_final=rho,
        branch=branch,
    )


def refine_solution(problem: LcqpProblem, solution: LcqpSolution,
                    options: SolverOptions = None) -> LcqpSolution:
    """Re-polish a solved LCQP solution onto its implied branch."""
    opts = options or SolverOptions()
    x, kkt, branch = _branch_polish(problem, solution.x, solution.kkt_residual, opts)
    return _finish(problem, x, solution.status, kkt, solution.iterations,
                   solution.rho_final, branch)
