# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled primal active-set kernel; twin of active_set.asqp_kernel.

Same algorithm and deterministic pivoting rules as the pure-Python kernel:
null-space steps against a Householder QR of the working rows (refactored
every iteration), exact linear-independence screening through the QR tail,
Bland's rule after degenerate runs, and a stall detector. The two kernels
may differ in floating-point rounding but each is deterministic.
"""

import numpy as np

from libc.math cimport fabs, sqrt

OPTIMAL = 0
ITER_LIMIT = 1
NUMERICAL = 2

cdef double TOL_STEP = 1e-10
cdef double TOL_DENOM = 1e-13
cdef double TOL_INDEP = 1e-8


cdef int _chol(double[:, :] A, int n) noexcept nogil:
    cdef int i, j, k
    cdef double s
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 0.0:
            return 1
        A[j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    return 0


cdef void _chol_solve(double[:, :] L, double* b, int n) noexcept nogil:
    cdef int i, k
    cdef double s
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * b[k]
        b[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, n):
            s -= L[k, i] * b[k]
        b[i] = s / L[i, i]


cdef void _qr_accumulate(double[:, ::1] A, double[:, ::1] P, double* v,
                         int n, int w) noexcept nogil:
    """Householder QR of A (n x w, overwritten; R lands in its upper part)
    while accumulating P := Q^T (P must start as identity)."""
    cdef int i, j, k
    cdef double sigma, alpha, beta, s
    for k in range(w):
        sigma = 0.0
        for i in range(k, n):
            sigma += A[i, k] * A[i, k]
        sigma = sqrt(sigma)
        if sigma == 0.0:
            continue
        alpha = -sigma if A[k, k] >= 0.0 else sigma
        for i in range(k, n):
            v[i] = A[i, k]
        v[k] -= alpha
        s = 0.0
        for i in range(k, n):
            s += v[i] * v[i]
        if s == 0.0:
            continue
        beta = 2.0 / s
        for j in range(k, w):
            s = 0.0
            for i in range(k, n):
                s += v[i] * A[i, j]
            s *= beta
            for i in range(k, n):
                A[i, j] -= s * v[i]
        for j in range(n):
            s = 0.0
            for i in range(k, n):
                s += v[i] * P[i, j]
            s *= beta
            for i in range(k, n):
                P[i, j] -= s * v[i]


def asqp_kernel(H, g, rows, rhs, is_eq, x0, warm_rows, max_iter):
    cdef int n = H.shape[0]
    cdef int m = rows.shape[0]
    cdef int max_it = int(max_iter)

    H_arr = np.ascontiguousarray(H, dtype=np.float64)
    g_arr = np.ascontiguousarray(g, dtype=np.float64)
    rows_arr = np.ascontiguousarray(rows, dtype=np.float64)
    rhs_arr = np.ascontiguousarray(rhs, dtype=np.float64)
    eq_arr = np.ascontiguousarray(np.asarray(is_eq), dtype=np.uint8)
    x_arr = np.array(x0, dtype=np.float64)

    cdef double[:, ::1] Hv = H_arr
    cdef double[::1] gv = g_arr
    cdef double[:, ::1] rv = rows_arr
    cdef double[::1] bv = rhs_arr
    cdef unsigned char[::1] ev = eq_arr
    cdef double[::1] x = x_arr

    work_arr = np.zeros(n + 1, dtype=np.int64)
    inwork_arr = np.zeros(max(m, 1), dtype=np.uint8)
    cdef long long[::1] work = work_arr
    cdef unsigned char[::1] in_work = inwork_arr
    cdef int wlen = 0

    cdef int i, j, k, it, row, w, nz, worst, worst_row, block, dropped
    # Over-determined but consistent equality sets are legal (pinned
    # complementarity branches); only n of them can sit in the working
    # set, the rest are implied and stay monitored from outside.
    for i in range(m):
        if ev[i] and wlen < n:
            work[wlen] = i
            in_work[i] = 1
            wlen += 1
    for obj in warm_rows:
        i = int(obj)
        if 0 <= i < m and not in_work[i] and wlen < n:
            work[wlen] = i
            in_work[i] = 1
            wlen += 1

    A_a = np.zeros((n, n + 1))
    P_a = np.zeros((n, n))
    T_a = np.zeros((n, n))
    grad_a = np.zeros(n)
    gnew_a = np.zeros(n)
    p_a = np.zeros(n)
    pr_a = np.zeros(n)
    u_a = np.zeros(n + 1)
    cw_a = np.zeros(n + 1)
    nu_a = np.zeros(n + 1)
    v_a = np.zeros(n)
    t1_a = np.zeros(n)
    t2_a = np.zeros(n)
    cdef double[:, ::1] A = A_a
    cdef double[:, ::1] P = P_a
    cdef double[:, ::1] T = T_a
    cdef double[::1] grad = grad_a
    cdef double[::1] gnew = gnew_a
    cdef double[::1] p = p_a
    cdef double[::1] pr = pr_a
    cdef double[::1] u = u_a
    cdef double[::1] cw = cw_a
    cdef double[::1] nu = nu_a
    cdef double[::1] v = v_a
    cdef double[::1] t1 = t1_a
    cdef double[::1] t2 = t2_a

    cdef double scale, s, xmax, pmax, mn, alpha, ratio, slack, dp, cwmax, dmax, outn, anorm
    cdef int no_progress = 0
    cdef int full_steps = 0
    cdef int bland = 0
    cdef int screen

    for it in range(1, max_it + 1):
        for i in range(n):
            s = gv[i]
            for j in range(n):
                s += Hv[i, j] * x[j]
            grad[i] = s
        scale = 1.0
        for i in range(n):
            if 1.0 + fabs(grad[i]) > scale:
                scale = 1.0 + fabs(grad[i])
        xmax = 0.0
        for j in range(n):
            if fabs(x[j]) > xmax:
                xmax = fabs(x[j])

        w = wlen
        cwmax = 0.0
        if w > 0:
            for j in range(n):
                for k in range(w):
                    A[j, k] = rv[<int> work[k], j]
                for k in range(n):
                    P[j, k] = 1.0 if j == k else 0.0
            _qr_accumulate(A, P, &v[0], n, w)
            dmax = 1.0
            for k in range(w):
                if fabs(A[k, k]) > dmax:
                    dmax = fabs(A[k, k])
            # Dependent rows leave the working set; redundant equalities
            # are implied by the rest, so dropping them is sound too.
            dropped = 0
            for k in range(w - 1, -1, -1):
                if fabs(A[k, k]) <= TOL_INDEP * dmax and not ev[<int> work[k]]:
                    in_work[<int> work[k]] = 0
                    for j in range(k, wlen - 1):
                        work[j] = work[j + 1]
                    wlen -= 1
                    dropped = 1
                    break
            if not dropped:
                for k in range(w - 1, -1, -1):
                    if fabs(A[k, k]) <= TOL_INDEP * dmax:
                        in_work[<int> work[k]] = 0
                        for j in range(k, wlen - 1):
                            work[j] = work[j + 1]
                        wlen -= 1
                        dropped = 1
                        break
            if dropped:
                continue
            for k in range(w):
                row = <int> work[k]
                s = bv[row]
                for j in range(n):
                    s -= rv[row, j] * x[j]
                cw[k] = s
                if fabs(s) > cwmax:
                    cwmax = fabs(s)
            for k in range(w):
                s = cw[k]
                for j in range(k):
                    s -= A[j, k] * u[j]
                if A[k, k] == 0.0:
                    return NUMERICAL, x_arr, [int(work[t_]) for t_ in range(wlen)], np.array(nu_a[:wlen]), it
                u[k] = s / A[k, k]
            for j in range(n):
                s = 0.0
                for k in range(w):
                    s += P[k, j] * u[k]
                pr[j] = s
            nz = n - w
            if nz > 0:
                for i in range(nz):
                    for j in range(n):
                        s = 0.0
                        for k in range(n):
                            s += P[w + i, k] * Hv[k, j]
                        t2[j] = s
                    for j in range(i, nz):
                        s = 0.0
                        for k in range(n):
                            s += t2[k] * P[w + j, k]
                        T[i, j] = s
                        T[j, i] = s
                for j in range(n):
                    t1[j] = x[j] + pr[j]
                for i in range(n):
                    s = gv[i]
                    for j in range(n):
                        s += Hv[i, j] * t1[j]
                    t2[i] = s
                for i in range(nz):
                    s = 0.0
                    for j in range(n):
                        s += P[w + i, j] * t2[j]
                    u[i] = -s
                if _chol(T[:nz, :nz], nz):
                    return NUMERICAL, x_arr, [int(work[t_]) for t_ in range(wlen)], np.array(nu_a[:wlen]), it
                _chol_solve(T[:nz, :nz], &u[0], nz)
                for j in range(n):
                    s = pr[j]
                    for i in range(nz):
                        s += P[w + i, j] * u[i]
                    p[j] = s
            else:
                for j in range(n):
                    p[j] = pr[j]
            for j in range(n):
                t1[j] = x[j] + p[j]
            for i in range(n):
                s = gv[i]
                for j in range(n):
                    s += Hv[i, j] * t1[j]
                gnew[i] = s
            for k in range(w):
                s = 0.0
                for j in range(n):
                    s += P[k, j] * gnew[j]
                u[k] = s
            for k in range(w - 1, -1, -1):
                s = u[k]
                for j in range(k + 1, w):
                    s -= A[k, j] * nu[j]
                nu[k] = s / A[k, k]
        else:
            for j in range(n):
                for k in range(n):
                    T[j, k] = Hv[j, k]
            if _chol(T[:n, :n], n):
                return NUMERICAL, x_arr, [], np.zeros(0), it
            for j in range(n):
                p[j] = -grad[j]
            _chol_solve(T[:n, :n], &p[0], n)
            for i in range(n):
                s = grad[i]
                for j in range(n):
                    s += Hv[i, j] * p[j]
                t1[i] = -s
            _chol_solve(T[:n, :n], &t1[0], n)
            for j in range(n):
                p[j] += t1[j]

        pmax = 0.0
        for j in range(n):
            if fabs(p[j]) > pmax:
                pmax = fabs(p[j])
        if pmax != pmax:      # NaN guard
            return NUMERICAL, x_arr, [int(work[t_]) for t_ in range(wlen)], np.array(nu_a[:wlen]), it

        if pmax <= TOL_STEP * (1.0 + xmax) or (full_steps >= 3 and pmax <= 1e-6 * (1.0 + xmax)):
            # Subspace minimizer: drop the most negative inequality
            # multiplier (rows still violated are never dropped).
            mn = 0.0
            worst = -1
            worst_row = -1
            for k in range(wlen):
                row = <int> work[k]
                if ev[row]:
                    continue
                s = -bv[row]
                for j in range(n):
                    s += rv[row, j] * x[j]
                if s < -1e-11 * (1.0 + xmax):
                    continue
                if bland:
                    if nu[k] < -1e-9 * scale and (worst < 0 or row < worst_row):
                        worst = k
                        worst_row = row
                        mn = nu[k]
                elif worst < 0 or nu[k] < mn or (nu[k] == mn and row < worst_row):
                    mn = nu[k]
                    worst = k
                    worst_row = row
            if worst < 0 or mn >= -1e-9 * scale:
                return OPTIMAL, x_arr, [int(work[t_]) for t_ in range(wlen)], np.array(nu_a[:wlen]), it
            in_work[worst_row] = 0
            for k in range(worst, wlen - 1):
                work[k] = work[k + 1]
                nu[k] = nu[k + 1]
            wlen -= 1
            full_steps = 0
            continue

        # Ratio test; rows inside the span of a settled working set are
        # screened out through the exact QR tail norm.
        screen = 1 if (wlen > 0 and (cwmax <= 1e-9 * (1.0 + xmax) or wlen >= n)) else 0
        alpha = 1.0
        block = -1
        while True:
            alpha = 1.0
            block = -1
            for i in range(m):
                if in_work[i]:
                    continue
                dp = 0.0
                slack = -bv[i]
                for j in range(n):
                    dp += rv[i, j] * p[j]
                    slack += rv[i, j] * x[j]
                if dp >= -TOL_DENOM:
                    continue
                if slack < 0.0:
                    slack = 0.0
                ratio = slack / (-dp)
                if ratio < alpha:
                    alpha = ratio
                    block = i
            if block < 0 or not screen:
                break
            outn = 0.0
            anorm = 0.0
            for j in range(n):
                anorm += rv[block, j] * rv[block, j]
            for i in range(wlen, n):
                s = 0.0
                for j in range(n):
                    s += P[i, j] * rv[block, j]
                outn += s * s
            if outn > TOL_INDEP * TOL_INDEP * anorm:
                break
            in_work[block] = 2
            block = -1
        for i in range(m):
            if in_work[i] == 2:
                in_work[i] = 0
        for j in range(n):
            x[j] += alpha * p[j]
        if alpha <= 1e-13:
            no_progress += 1
            if no_progress > 12:
                bland = 1
            if no_progress > m + n + 10:
                return NUMERICAL, x_arr, [int(work[t_]) for t_ in range(wlen)], np.array(nu_a[:wlen]), it
        else:
            no_progress = 0
        if block < 0:
            full_steps += 1
        else:
            full_steps = 0
            if wlen >= n:
                return NUMERICAL, x_arr, [int(work[t_]) for t_ in range(wlen)], np.array(nu_a[:wlen]), it
            work[wlen] = block
            in_work[block] = 1
            wlen += 1

    return ITER_LIMIT, x_arr, [int(work[t_]) for t_ in range(wlen)], np.array(nu_a[:wlen]), max_it
