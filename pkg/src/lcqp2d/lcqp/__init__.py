"""QPs with pairwise linear complementarity constraints.

solve() runs the penalty homotopy; brute_force_oracle() enumerates all
branches of small instances and is the testing ground truth. The inner
convex subproblems run on a compiled kernel when available (see backend).
"""

from .problem import (
    INFEASIBLE,
    MAX_PENALTY,
    SOLVED,
    SUBPROBLEM_FAILURE,
    LcqpProblem,
    LcqpSolution,
    SolverOptions,
)
from .qp import ConvexQp, QpResult, solve_convex_qp
from .penalty import solve
from .oracle import brute_force_oracle
from .backend import backend_name
from .fileio import ProblemFormatError, dump_problem, load_problem, read_problem, write_problem

__all__ = [
    "INFEASIBLE",
    "MAX_PENALTY",
    "SOLVED",
    "SUBPROBLEM_FAILURE",
    "LcqpProblem",
    "LcqpSolution",
    "SolverOptions",
    "ConvexQp",
    "QpResult",
    "solve_convex_qp",
    "solve",
    "brute_force_oracle",
    "backend_name",
    "ProblemFormatError",
    "dump_problem",
    "load_problem",
    "read_problem",
    "write_problem",
]
