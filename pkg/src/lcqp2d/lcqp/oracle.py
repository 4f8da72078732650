"""Exhaustive branch enumeration: the global optimum of small LCQPs.

Each complementarity pair admits two branches (pin the left side to zero,
or pin the right side). Solving the convex QP of every one of the 2^k
branch assignments and keeping the best feasible objective yields the
global optimum. Intended as a test oracle; the exponential sweep is capped
at k <= 12.
"""

from __future__ import annotations

import numpy as np

from .problem import INFEASIBLE, SOLVED, LcqpProblem, LcqpSolution
from .penalty import _branch_qp
from . import qp as qpmod

MAX_PAIRS = 12
_TIE = 1e-9


def brute_force_oracle(problem: LcqpProblem) -> LcqpSolution:
    """Globally minimize an LCQP by enumerating all complementarity branches.

    Among branches whose objectives agree within 1e-9 the lowest branch
    index wins, so the result is deterministic.
    """
    k = problem.n_pairs
    if k > MAX_PAIRS:
        raise ValueError(f"oracle limited to {MAX_PAIRS} pairs, got {k}")

    best = None
    best_branch = None
    for code in range(2 ** k):
        branch = np.array([(code >> j) & 1 for j in range(k)], dtype=np.int8)
        res = _branch_qp(problem, branch).solve(problem.g)
        if not res.optimal:
            continue
        obj = problem.objective(res.x)
        if best is None or obj < best[0] - _TIE:
            best = (obj, res)
            best_branch = branch
    if best is None:
        return LcqpSolution(x=np.zeros(problem.n), objective=np.inf,
                            comp_residual=np.inf, kkt_residual=np.inf,
                            feas_residual=np.inf, status=INFEASIBLE)
    obj, res = best
    return LcqpSolution(
        x=res.x,
        objective=obj,
        comp_residual=problem.comp_residual(res.x),
        kkt_residual=res.kkt_residual,
        feas_residual=problem.feasibility_residual(res.x),
        status=SOLVED,
        iterations=res.iterations,
        branch=best_branch,
    )
