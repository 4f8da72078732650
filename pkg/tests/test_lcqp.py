import numpy as np
import pytest

from lcqp2d.lcqp import (
    LcqpProblem,
    SolverOptions,
    brute_force_oracle,
    solve,
)


def test_no_pairs_reduces_to_plain_qp():
    p = LcqpProblem(Q=np.array([[1.0]]), g=np.array([0.0]),
                    C=np.array([[1.0]]), d=np.array([-1.0]))
    s = solve(p)
    o = brute_force_oracle(p)
    assert s.solved and o.solved
    assert s.x[0] == pytest.approx(1.0, abs=1e-9)
    assert o.objective == pytest.approx(s.objective, abs=1e-9)


def test_two_sided_complementarity_toy():
    # minimize 1/2 (x-1)^2 + 1/2 (y-1)^2  with 0 <= x perp y >= 0:
    # both branches land at objective 0.5 (constant terms dropped: -0.5).
    p = LcqpProblem(Q=np.eye(2), g=np.array([-1.0, -1.0]),
                    L=np.array([[1.0, 0.0]]), l=np.zeros(1),
                    R=np.array([[0.0, 1.0]]), r=np.zeros(1))
    s = solve(p)
    o = brute_force_oracle(p)
    assert s.solved
    assert s.objective + 1.0 == pytest.approx(0.5, abs=1e-8)
    assert o.objective == pytest.approx(s.objective, abs=1e-8)
    # exactly one of x, y is zero
    assert min(s.x) == pytest.approx(0.0, abs=1e-9)
    assert max(s.x) == pytest.approx(1.0, abs=1e-9)


def test_self_paired_variable_forced_to_zero():
    p = LcqpProblem(Q=np.array([[1.0]]), g=np.array([1.0]),
                    L=np.array([[1.0]]), l=np.zeros(1),
                    R=np.array([[1.0]]), r=np.zeros(1))
    s = solve(p)
    assert s.solved
    assert s.x[0] == pytest.approx(0.0, abs=1e-10)
    assert s.objective == pytest.approx(0.0, abs=1e-10)


def test_infeasible_lcqp_reported():
    p = LcqpProblem(Q=np.eye(1), g=np.zeros(1),
                    C=np.array([[1.0], [-1.0]]), d=np.array([-2.0, 0.0]))
    s = solve(p)
    assert s.status == "infeasible"


def test_validate_rejects_indefinite_q():
    p = LcqpProblem(Q=np.array([[0.0, 1.0], [1.0, 0.0]]), g=np.zeros(2))
    with pytest.raises(ValueError):
        p.validate()


def _random_lcqp(rng):
    n = int(rng.integers(2, 11))
    k = int(rng.integers(1, 7))
    M = rng.normal(size=(n, n))
    Q = M.T @ M + 0.1 * np.eye(n)
    g = rng.normal(size=n)
    x_star = rng.normal(size=n)
    mi = int(rng.integers(0, 4))
    C = rng.normal(size=(mi, n))
    d = -(C @ x_star) + rng.uniform(0.0, 1.0, size=mi)
    me = int(rng.integers(0, 2))
    A = rng.normal(size=(me, n))
    b = -(A @ x_star)
    L = rng.normal(size=(k, n))
    R = rng.normal(size=(k, n))
    l = np.empty(k)
    r = np.empty(k)
    for j in range(k):
        if rng.random() < 0.5:
            l[j] = -(L[j] @ x_star)
            r[j] = -(R[j] @ x_star) + rng.uniform(0, 1)
        else:
            l[j] = -(L[j] @ x_star) + rng.uniform(0, 1)
            r[j] = -(R[j] @ x_star)
    return LcqpProblem(Q=Q, g=g, A=A, b=b, C=C, d=d,
                       lb=x_star - 5, ub=x_star + 5, L=L, l=l, R=R, r=r)


def test_random_lcqps_against_oracle():
    """Penalty solver on 200 random instances: solves >= 95 percent to
    tolerance and never undercuts the exhaustive-branch optimum."""
    rng = np.random.default_rng(42)
    solved = 0
    for _ in range(200):
        p = _random_lcqp(rng)
        s = solve(p)
        o = brute_force_oracle(p)
        assert o.solved, "construction guarantees feasibility"
        if s.solved:
            solved += 1
            assert s.comp_residual <= 1e-8
            assert s.feas_residual <= 1e-8
            assert s.objective >= o.objective - 1e-6
    assert solved >= 190


def test_oracle_deterministic_tie_break():
    # symmetric toy: both branches optimal; oracle must always return the
    # same one
    p = LcqpProblem(Q=np.eye(2), g=np.array([-1.0, -1.0]),
                    L=np.array([[1.0, 0.0]]), l=np.zeros(1),
                    R=np.array([[0.0, 1.0]]), r=np.zeros(1))
    xs = [brute_force_oracle(p).x for _ in range(3)]
    assert np.array_equal(xs[0], xs[1]) and np.array_equal(xs[1], xs[2])


def test_oracle_refuses_oversized_instances():
    n, k = 3, 13
    p = LcqpProblem(Q=np.eye(n), g=np.zeros(n),
                    L=np.zeros((k, n)), l=np.ones(k),
                    R=np.zeros((k, n)), r=np.ones(k))
    with pytest.raises(ValueError):
        brute_force_oracle(p)


def test_solver_determinism():
    rng = np.random.default_rng(404)
    p = _random_lcqp(rng)
    s1 = solve(p)
    s2 = solve(p)
    assert np.array_equal(s1.x, s2.x)
    assert s1.status == s2.status
    assert s1.iterations == s2.iterations


# ---------------------------------------------------------------------------
# Curated unique-solution suite. Each instance has a unique, strictly
# complementary global optimum; expected objectives come from the
# exhaustive-branch oracle at test time.


def curated_suite():
    out = []
    rng = np.random.default_rng(777)
    # ten separable two-variable instances with a clearly cheaper branch
    for i in range(10):
        a = 1.0 + 0.3 * i
        p = LcqpProblem(
            Q=np.diag([1.0, 2.0]),
            g=np.array([-a, -0.3]),
            L=np.array([[1.0, 0.0]]), l=np.zeros(1),
            R=np.array([[0.0, 1.0]]), r=np.zeros(1),
            lb=np.array([-10.0, -10.0]), ub=np.array([10.0, 10.0]),
        )
        out.append(p)
    # ten larger instances built around a strictly complementary optimum
    for i in range(10):
        n = 4 + (i % 3)
        M = rng.normal(size=(n, n))
        Q = M.T @ M + (0.5 + 0.1 * i) * np.eye(n)
        x_star = rng.uniform(0.5, 1.5, size=n)
        L = np.zeros((2, n))
        R = np.zeros((2, n))
        L[0, 0] = 1.0
        R[0, 1] = 1.0
        L[1, 2] = 1.0
        R[1, 3 % n] = 1.0
        x_star[0] = 0.0          # pin the left side of pair 0
        x_star[2] = 0.0          # pin the left side of pair 1
        g = -(Q @ x_star)        # unconstrained optimum at x_star
        out.append(LcqpProblem(Q=Q, g=g, L=L, l=np.zeros(2), R=R, r=np.zeros(2),
                               lb=np.full(n, -10.0), ub=np.full(n, 10.0)))
    return out


def test_curated_unique_solution_suite():
    suite = curated_suite()
    assert len(suite) == 20
    matches = 0
    for p in suite:
        o = brute_force_oracle(p)
        assert o.solved
        s = solve(p)
        if s.solved and abs(s.objective - o.objective) <= 1e-6 * (1 + abs(o.objective)):
            matches += 1
    assert matches >= 19
