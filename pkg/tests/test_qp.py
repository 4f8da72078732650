import numpy as np
import pytest

from lcqp2d.lcqp import ConvexQp, solve_convex_qp
from lcqp2d.lcqp import backend


def test_backend_reports_a_name():
    assert backend.backend_name() in ("compiled", "python")


def test_simple_bound():
    r = solve_convex_qp(np.array([[1.0]]), np.array([0.0]),
                        C=np.array([[1.0]]), d=np.array([-1.0]))
    assert r.optimal
    assert r.x[0] == pytest.approx(1.0, abs=1e-10)
    assert 0.5 * r.x[0] ** 2 == pytest.approx(0.5, abs=1e-10)


def test_symmetric_projection():
    r = solve_convex_qp(np.eye(2), np.zeros(2),
                        A=np.array([[1.0, 1.0]]), b=np.array([-1.0]))
    assert r.optimal
    assert np.allclose(r.x, (0.5, 0.5), atol=1e-10)


def test_clamped_box():
    r = solve_convex_qp(np.array([[1.0]]), np.array([-2.0]),
                        lb=np.array([0.0]), ub=np.array([1.0]))
    assert r.optimal
    assert r.x[0] == pytest.approx(1.0, abs=1e-12)


def test_infeasible_detected():
    r = solve_convex_qp(np.array([[1.0]]), np.zeros(1),
                        C=np.array([[1.0], [-1.0]]), d=np.array([-1.0, -1.0]))
    assert r.status == "infeasible"


def test_inconsistent_bounds_raise():
    with pytest.raises(ValueError):
        ConvexQp(np.eye(1), lb=np.array([2.0]), ub=np.array([1.0]))


def test_fixed_variables_become_equalities():
    qp = ConvexQp(np.eye(2), lb=np.array([0.7, -np.inf]), ub=np.array([0.7, np.inf]))
    r = qp.solve(np.array([0.0, -1.0]))
    assert r.optimal
    assert r.x[0] == pytest.approx(0.7, abs=1e-12)
    assert r.x[1] == pytest.approx(1.0, abs=1e-10)


def _random_instance(rng):
    n = int(rng.integers(1, 9))
    M = rng.normal(size=(n, n))
    Q = M.T @ M + 1e-3 * np.eye(n)
    g = rng.normal(size=n)
    x_feas = rng.normal(size=n)
    mi = int(rng.integers(0, 6))
    C = rng.normal(size=(mi, n))
    d = -(C @ x_feas) + rng.uniform(0.0, 1.0, size=mi)
    me = int(rng.integers(0, min(2, n) + 1))
    A = rng.normal(size=(me, n))
    b = -(A @ x_feas)
    lb = x_feas - rng.uniform(0.5, 3.0, size=n)
    ub = x_feas + rng.uniform(0.5, 3.0, size=n)
    return Q, g, A, b, C, d, lb, ub


def test_random_instances_reach_kkt_tolerance():
    rng = np.random.default_rng(0)
    for _ in range(200):
        Q, g, A, b, C, d, lb, ub = _random_instance(rng)
        r = solve_convex_qp(Q, g, A=A, b=b, C=C, d=d, lb=lb, ub=ub)
        assert r.optimal
        assert r.kkt_residual <= 1e-9


def test_random_instances_match_kkt_system_oracle():
    """Independent check: solve the equality system of the reported active
    set directly and compare objectives."""
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(100):
        Q, g, A, b, C, d, lb, ub = _random_instance(rng)
        qp = ConvexQp(Q, A=A, b=b, C=C, d=d, lb=lb, ub=ub)
        r = qp.solve(g)
        assert r.optimal
        if not len(r.working_rows):
            continue
        Aw = qp.rows[np.array(r.working_rows)]
        w = len(r.working_rows)
        kkt = np.zeros((qp.n + w, qp.n + w))
        kkt[: qp.n, : qp.n] = Q
        kkt[: qp.n, qp.n:] = -Aw.T
        kkt[qp.n:, : qp.n] = Aw
        rhs = np.concatenate([-g, qp.rhs[np.array(r.working_rows)]])
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        x_direct = sol[: qp.n]
        obj_direct = 0.5 * x_direct @ Q @ x_direct + g @ x_direct
        assert r.objective == pytest.approx(obj_direct, rel=1e-8, abs=1e-10)
        checked += 1
    assert checked > 50


def test_determinism_bitwise():
    rng = np.random.default_rng(2)
    Q, g, A, b, C, d, lb, ub = _random_instance(rng)
    r1 = solve_convex_qp(Q, g, A=A, b=b, C=C, d=d, lb=lb, ub=ub)
    r2 = solve_convex_qp(Q, g, A=A, b=b, C=C, d=d, lb=lb, ub=ub)
    assert np.array_equal(r1.x, r2.x)
    assert r1.working_rows == r2.working_rows


def test_backends_agree():
    """Both kernels solve the same random suite to the same optimum."""
    from lcqp2d.lcqp import active_set
    try:
        from lcqp2d.lcqp import _ascore
    except ImportError:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(3)
    for _ in range(50):
        Q, g, A, b, C, d, lb, ub = _random_instance(rng)
        qp = ConvexQp(Q, A=A, b=b, C=C, d=d, lb=lb, ub=ub)
        res = {}
        for name, kern in (("py", active_set), ("c", _ascore)):
            backend._BACKEND = kern
            try:
                res[name] = qp.solve(g)
            finally:
                backend._BACKEND = None
        assert res["py"].optimal and res["c"].optimal
        assert res["py"].objective == pytest.approx(res["c"].objective,
                                                    rel=1e-7, abs=1e-9)
