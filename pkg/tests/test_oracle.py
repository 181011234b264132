import numpy as np
import pytest

from sigring.cones import PolyhedralSet
from sigring.lower import ProblemInstance
from sigring.oracle import NO_FEASIBLE_POINT, GridSpec, grid_minimize, identity_check, oracle_value
from sigring.problems import FIVE_VAR_LOWER, FIVE_VAR_UPPER, FIVE_VAR_VALUE, five_var_problem
from sigring.ring import Signomial, SignomialRing

TOY_F = Signomial({(2,): 1.0, (1,): -1.0}, 1)
TOY_RING = SignomialRing([(0,), (1,), (2,)])


def toy_box():
    return ProblemInstance(TOY_RING, TOY_F, X=PolyhedralSet.box([-3.0], [1.0]))


def test_toy_grid():
    res = grid_minimize(toy_box(), GridSpec.uniform([-3.0], [1.0], 10**4), local=False)
    assert res.found and abs(res.value + 0.25) <= 1e-4


def test_infeasible_constant_constraint():
    g = Signomial({(0,): -2.0}, 1)  # -1 - e^0 >= 0
    p = ProblemInstance(TOY_RING, TOY_F, [g], X=PolyhedralSet.box([-3.0], [1.0]))
    res = grid_minimize(p, GridSpec.uniform([-3.0], [1.0], 100))
    assert res.status == NO_FEASIBLE_POINT and not res.found


def five_var_multistart():
    p = five_var_problem("natural")
    spec = GridSpec.for_problem(p, 6)
    return p, grid_minimize(p, spec)


def vertex_value():
    # active set at the benchmark optimum: t1, t2 at lower bounds, t4 at its upper bound,
    # constraints c2 and c4 tight; solve the remaining 2x2 system for (t3, t5) exactly
    from scipy.optimize import brentq

    t1, t2, t4 = FIVE_VAR_LOWER[0], FIVE_VAR_LOWER[1], FIVE_VAR_UPPER[3]

    def t5_of(t3):  # c2 = 0 solved for t5
        return (-1000.0 + 0.09395 * t1 * t4) / (0.33085 * t3 - 0.853007 * t2)

    def c4(t3):
        return 0.2668 * t1 * t3 + 0.40584 * t3 * t4 + t3 * t5_of(t3) - 2275.1326

    t3 = brentq(c4, 28.0, 32.0, xtol=1e-14)
    t5 = t5_of(t3)
    return 5.3578 * t3 ** 2 + 0.8357 * t1 * t5 + 37.2393 * t1


def test_five_var_multistart_matches_vertex():
    p, res = five_var_multistart()
    assert res.found and res.violation <= 1e-6
    assert res.value == pytest.approx(vertex_value(), abs=1e-3)


@pytest.mark.xfail(strict=True, reason="the stated target sits below the true optimum of the rounded data")
def test_five_var_multistart_target():
    _, res = five_var_multistart()
    assert res.value <= 10122.50


def test_feasible_points_really_feasible():
    p = five_var_problem("natural")
    spec = GridSpec.for_problem(p, 6)
    res = grid_minimize(p, spec, polish=0)
    assert res.found and res.x is not None
    assert p.violation(res.grid_x) <= spec.tol / 2


def test_deterministic():
    p = toy_box()
    spec = GridSpec.uniform([-3.0], [1.0], 500)
    a, b = grid_minimize(p, spec), grid_minimize(p, spec)
    assert a.value == b.value and np.array_equal(a.x, b.x)


def test_budget_enforced():
    with pytest.raises(ValueError):
        GridSpec.uniform([0.0] * 3, [1.0] * 3, 1000)


def test_unbounded_rejected():
    p = ProblemInstance(TOY_RING, TOY_F)
    with pytest.raises(ValueError):
        oracle_value(p)


def test_identity_binomial():
    lhs = Signomial({(0,): 1.0, (1,): 1.0}, 1) ** 2
    rhs = Signomial({(0,): 1.0, (1,): 2.0, (2,): 1.0}, 1)
    rep = identity_check(lhs, rhs)
    assert rep and rep.discrepancy == 0.0


def test_identity_perturbed():
    lhs = Signomial({(0,): 1.0, (1,): 1.0}, 1) ** 2
    rhs = Signomial({(0,): 1.001, (1,): 2.0, (2,): 1.0}, 1)
    assert not identity_check(lhs, rhs, tol=1e-6)
