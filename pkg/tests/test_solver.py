import itertools
import math

import numpy as np
import pytest

from sigring.solver import (ConicBuilder, SolverOptions, Status, dump_problem, linprog, load_problem, solve,
                            solve_lp)

TOL = 1e-7


def exp_problem():
    # min w  s.t. (u, v, w) = (1, 1, w) in EXP
    B = ConicBuilder()
    u, v, w = B.exp_cones(1)[0]
    B.add_row({int(u): 1.0}, 1.0)
    B.add_row({int(v): 1.0}, 1.0)
    B.set_objective({int(w): 1.0})
    return B.build(), int(w)


def test_exp_cone_gives_e():
    p, w = exp_problem()
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert abs(sol.x[w] - math.e) <= TOL


def test_trivial_lp():
    B = ConicBuilder()
    x = B.nonneg(1)
    B.set_objective({int(x[0]): 1.0})
    sol = solve(B.build())
    assert sol.status is Status.OPTIMAL
    assert abs(sol.x[0]) <= TOL


def test_contradictory_equalities_infeasible():
    B = ConicBuilder()
    x = B.free(1)
    B.add_row({int(x[0]): 1.0}, 1.0)
    B.add_row({int(x[0]): 1.0}, 2.0)
    B.set_objective({})
    p = B.build()
    sol = solve(p)
    assert sol.status is Status.PRIMAL_INFEASIBLE
    # Farkas ray: A^T y = 0 on a free variable, <b, y> < 0 (or > 0 with the opposite convention)
    y = sol.y
    assert y is not None
    assert np.abs(p.A_eq.T @ y).max() <= 1e-7 * np.abs(y).max()
    assert abs(p.b_eq @ y) > 1e-3 * np.abs(y).max()


def test_max_x_le_one():
    sol, x = linprog([1.0], A_ub=[[1.0]], b_ub=[1.0], maximize=True)
    assert sol.optimal and abs(x[0] - 1.0) <= 1e-8


def test_empty_region():
    sol, x = linprog([0.0, 0.0], A_ub=[[1.0, 0.0], [-1.0, 0.0]], b_ub=[-1.0, 0.0])
    assert sol.status is Status.PRIMAL_INFEASIBLE and x is None


def _vertex_min(c, A, b):
    n = len(c)
    best = math.inf
    for rows in itertools.combinations(range(len(b)), n):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ x <= b + 1e-9):
            best = min(best, float(c @ x))
    return best


@pytest.mark.parametrize("seed", range(5))
def test_random_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    A = np.vstack([rng.normal(size=(6, n)), np.eye(n), -np.eye(n)])
    b = np.concatenate([rng.random(6) + 0.5, np.full(2 * n, 3.0)])
    c = rng.normal(size=n)
    sol, x = linprog(c, A_ub=A, b_ub=b)
    assert sol.optimal
    assert abs(c @ x - _vertex_min(c, A, b)) <= 1e-8 * max(1, abs(c @ x))


def test_weak_duality_and_scaling():
    p, w = exp_problem()
    sol = solve(p)
    assert sol.primal_objective >= sol.dual_objective - 1e-7
    big = type(p)(p.c * 1e3, p.A_eq, p.b_eq, p.cones)
    sol2 = solve(big)
    assert sol2.primal_objective == pytest.approx(1e3 * sol.primal_objective, rel=1e-6)


def test_tighter_tolerance_is_self_consistent():
    p, _ = exp_problem()
    a = solve(p, SolverOptions(tol_feas=1e-8, tol_gap=1e-8)).primal_objective
    b = solve(p, SolverOptions(tol_feas=1e-10, tol_gap=1e-10)).primal_objective
    assert abs(a - b) <= 10 * 1e-8


def test_exp_slab_membership():
    p, _ = exp_problem()
    x = solve(p).x
    u, v, w = x[:3]
    assert v >= -1e-8 and v * math.exp(u / max(v, 1e-300)) <= w + 1e-8 * max(1.0, abs(w))


def test_deterministic():
    p, _ = exp_problem()
    assert np.array_equal(solve(p).x, solve(p).x)


def test_solve_lp_rejects_exp():
    p, _ = exp_problem()
    with pytest.raises(ValueError):
        solve_lp(p)


def test_dump_roundtrip():
    p, _ = exp_problem()
    q = load_problem(dump_problem(p))
    assert np.array_equal(q.c, p.c) and np.array_equal(q.b_eq, p.b_eq)
    assert (q.A_eq != p.A_eq).nnz == 0 and q.cones == p.cones


def test_env_tolerance(monkeypatch):
    monkeypatch.setenv("SIGRING_SOLVER_TOL", "1e-7")
    o = SolverOptions.from_env()
    assert o.tol_feas == 1e-7 and o.tol_gap == 1e-7
