"""Primal active-set iteration for dense convex QPs.

This is the pure-Python twin of the compiled kernel in _ascore.pyx. Both
implement the same algorithm with the same deterministic pivoting rules:

    minimize 1/2 x'Hx + g'x   subject to  rows[i] . x >= rhs[i]
                                          (== for rows flagged as equalities)

H must be positive definite (the caller regularizes) and x0 must satisfy
every inequality row; equality rows may carry residuals, which the first
steps remove.

The working-set subproblem is solved by the null-space method against a
QR factorization of the working rows, refactorized every iteration (the
problems are small). The QR tail norm gives an exact linear-independence
test, so candidate rows inside the span of the working set are never
admitted; with consistent working rows they cannot block either, so the
ratio test skips them. At a subspace minimizer the most negative
inequality multiplier leaves (lowest row index on ties, Bland's
lowest-index rule after a run of degenerate pivots, rows still violated
are never dropped).

Returns (status, x, working_rows, multipliers, iterations) with status
0 = optimal, 1 = iteration limit, 2 = numerical failure.
"""

from __future__ import annotations

import numpy as np

OPTIMAL = 0
ITER_LIMIT = 1
NUMERICAL = 2

_TOL_STEP = 1e-10
_TOL_DENOM = 1e-13
_TOL_INDEP = 1e-8


def asqp_kernel(H, g, rows, rhs, is_eq, x0, warm_rows, max_iter):
    n = H.shape[0]
    m = rows.shape[0]
    x = np.array(x0, dtype=float)

    work = [i for i in range(m) if is_eq[i]]
    in_work = np.zeros(m, dtype=bool)
    in_work[work] = True
    for i in warm_rows:
        i = int(i)
        if 0 <= i < m and not in_work[i] and len(work) < n:
            work.append(i)
            in_work[i] = True

    nu = np.zeros(0)
    no_progress = 0
    full_steps = 0
    bland = False
    for it in range(1, max_iter + 1):
        grad = H @ x + g
        scale = 1.0 + float(np.max(np.abs(grad))) if n else 1.0
        w = len(work)

        if w:
            w_arr = np.array(work)
            Aw = rows[w_arr]
            cw = rhs[w_arr] - Aw @ x
            Q, R = np.linalg.qr(Aw.T, mode="complete")
            R1 = R[:w]
            # Drop any working row that has become dependent (R pivot ~ 0).
            diag = np.abs(np.diag(R1))
            bad = np.nonzero(diag <= _TOL_INDEP * np.max(diag, initial=1.0))[0]
            # Dependent rows leave the working set; redundant equalities
            # are implied by the rest, so dropping them is sound too.
            dropped = False
            for k in reversed(bad):
                if not is_eq[work[int(k)]]:
                    in_work[work[int(k)]] = False
                    del work[int(k)]
                    dropped = True
                    break
            if not dropped and len(bad):
                k = int(bad[-1])
                in_work[work[k]] = False
                del work[k]
                dropped = True
            if dropped:
                continue
            try:
                u = np.linalg.solve(R1.T, cw)
            except np.linalg.LinAlgError:
                return NUMERICAL, x, work, nu, it
            p_range = Q[:, :w] @ u
            Z = Q[:, w:]
            if Z.shape[1]:
                T = Z.T @ H @ Z
                rhs_v = -(Z.T @ (H @ (x + p_range) + g))
                try:
                    cf = np.linalg.cholesky(T)
                    v = _chol_solve_np(cf, rhs_v)
                    # one refinement pass against the reduced system
                    v += _chol_solve_np(cf, rhs_v - T @ v)
                except np.linalg.LinAlgError:
                    return NUMERICAL, x, work, nu, it
                p = p_range + Z @ v
            else:
                p = p_range
            grad_new = H @ (x + p) + g
            nu = np.linalg.solve(R1, Q[:, :w].T @ grad_new)
        else:
            w_arr = None
            cw = np.zeros(0)
            try:
                p = -np.linalg.solve(H, grad)
                p -= np.linalg.solve(H, grad + H @ p)
            except np.linalg.LinAlgError:
                return NUMERICAL, x, work, nu, it
            nu = np.zeros(0)

        if not np.all(np.isfinite(p)):
            return NUMERICAL, x, work, nu, it
        x_scale = 1.0 + float(np.max(np.abs(x), initial=0.0))
        p_max = float(np.max(np.abs(p), initial=0.0))
        # A string of unblocked full steps with a tiny residual step means
        # the subspace minimizer is reached up to the solve's noise floor.
        if p_max <= _TOL_STEP * x_scale or (full_steps >= 3 and p_max <= 1e-6 * x_scale):
            # Subspace minimizer: drop the most negative inequality
            # multiplier. Rows still violated stay put; their working-set
            # correction is what restores them.
            if w:
                vals = np.where(is_eq[w_arr], np.inf, nu)
                resw = rows[w_arr] @ x - rhs[w_arr]
                vals = np.where(resw < -1e-11 * x_scale, np.inf, vals)
                mn = float(vals.min())
            else:
                mn = np.inf
            if mn >= -1e-9 * scale:
                return OPTIMAL, x, work, nu, it
            if bland:
                # Anti-cycling: lowest row index among negative multipliers.
                neg = np.nonzero(vals < -1e-9 * scale)[0]
                worst = int(neg[np.argmin(w_arr[neg])])
            else:
                ties = np.nonzero(vals == mn)[0]
                worst = int(ties[np.argmin(w_arr[ties])])
            in_work[work[worst]] = False
            del work[worst]
            full_steps = 0
            continue

        # Ratio test over rows outside the working set. Rows inside the
        # span of the working set cannot genuinely block once the working
        # rows sit on their bounds; the exact QR tail test screens them.
        dp_all = rows @ p
        blockable = (~in_work) & (dp_all < -_TOL_DENOM)
        screen = w > 0 and float(np.max(np.abs(cw), initial=0.0)) <= 1e-9 * x_scale
        alpha = 1.0
        block = -1
        while blockable.any():
            cand = np.nonzero(blockable)[0]
            slack = np.maximum(rows[cand] @ x - rhs[cand], 0.0)
            ratios = slack / -dp_all[cand]
            k = int(np.argmin(ratios))
            if ratios[k] >= 1.0:
                break
            r = int(cand[k])
            if screen or w >= n:
                tail = Q[:, w:].T @ rows[r] if w < n else np.zeros(0)
                outside = float(np.linalg.norm(tail))
                if outside <= _TOL_INDEP * max(float(np.linalg.norm(rows[r])), 1e-300):
                    blockable[r] = False
                    continue
            alpha = float(ratios[k])
            block = r
            break
        x = x + alpha * p
        no_progress = no_progress + 1 if alpha <= 1e-13 else 0
        full_steps = full_steps + 1 if block < 0 else 0
        if no_progress > 12:
            bland = True
        if no_progress > m + n + 10:
            return NUMERICAL, x, work, nu, it
        if block >= 0:
            if len(work) >= n:
                return NUMERICAL, x, work, nu, it
            work.append(block)
            in_work[block] = True

    return ITER_LIMIT, x, work, nu, max_iter


def _chol_solve_np(cf, b):
    y = np.linalg.solve(cf, b)
    return np.linalg.solve(cf.T, y)
