"""Benchmark: compiled QP kernel versus the pure-Python fallback.

Times the convex-QP engine on random instances and on the controller's
own step problem from the pivot scenario, then times full penalty solves.
Run from the repository root:

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from lcqp2d.contact import evaluate_all
from lcqp2d.controller import Controller
from lcqp2d.lcqp import ConvexQp, backend, solve
from lcqp2d.lcqp import active_set
from lcqp2d.scenario import load_scenario

try:
    from lcqp2d.lcqp import _ascore
    KERNELS = [("python", active_set), ("compiled", _ascore)]
except ImportError:
    KERNELS = [("python", active_set)]
    print("note: compiled kernel not available, timing the fallback only")


def random_qp(rng):
    n = int(rng.integers(8, 40))
    M = rng.normal(size=(n, n))
    Q = M.T @ M + 0.1 * np.eye(n)
    g = rng.normal(size=n)
    x_feas = rng.normal(size=n)
    mi = int(rng.integers(5, 30))
    C = rng.normal(size=(mi, n))
    d = -(C @ x_feas) + rng.uniform(0.0, 1.0, size=mi)
    lb = x_feas - rng.uniform(0.5, 3.0, size=n)
    ub = x_feas + rng.uniform(0.5, 3.0, size=n)
    return Q, g, C, d, lb, ub


def time_kernel(kern, instances, repeats=3):
    backend._BACKEND = kern
    try:
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            for Q, g, C, d, lb, ub in instances:
                r = ConvexQp(Q, C=C, d=d, lb=lb, ub=ub).solve(g)
                assert r.optimal
            best = min(best, time.perf_counter() - t0)
        return best
    finally:
        backend._BACKEND = None


def time_controller_problem(kern, repeats=3):
    scenario = load_scenario("pivot_box")
    world = scenario.build_world()
    controller = Controller(world, scenario.task(), scenario.controller_config())
    q = world.q0()
    geoms = evaluate_all(world, q)
    problem = controller.build_lcqp(q, geoms=geoms)
    x0 = controller._initial_point(q, geoms)
    backend._BACKEND = kern
    try:
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            for _ in range(10):
                s = solve(problem, controller.cfg.solver, x0=x0)
                assert s.solved
            best = min(best, (time.perf_counter() - t0) / 10)
        return best
    finally:
        backend._BACKEND = None


def main():
    rng = np.random.default_rng(0)
    instances = [random_qp(rng) for _ in range(60)]
    print(f"{'kernel':<10} {'60 random QPs':>16} {'controller LCQP':>18}")
    base = None
    for name, kern in KERNELS:
        t_qp = time_kernel(kern, instances)
        t_ctrl = time_controller_problem(kern)
        speedup = "" if base is None else f"  ({base / t_qp:.1f}x)"
        if base is None:
            base = t_qp
        print(f"{name:<10} {t_qp * 1e3:>12.1f} ms {t_ctrl * 1e3:>15.2f} ms{speedup}")


if __name__ == "__main__":
    main()
