import math

import numpy as np
import pytest

from sigring.moments import BoxMeasure
from sigring.ring import Signomial, SignomialRing
from sigring.solver import Status
from sigring.upper import (LEVEL0, NonInjectiveRing, dual_membership, upper_bound_dual_bisection,
                           upper_bound_primal)

TOY_F = Signomial({(2,): 1.0, (1,): -1.0}, 1)
TOY_RING = SignomialRing([(0,), (1,), (2,)])
TOY_BOX = BoxMeasure((-3.0,), (1.0,))
NEG_EXP = Signomial({(1,): -1.0}, 1)
NEG_RING = SignomialRing([(0,), (1,)])
UNIT = BoxMeasure((0.0,), (1.0,))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_constant_objective(d):
    res = upper_bound_primal(Signomial({(0,): 1.0}, 1), TOY_RING, TOY_BOX, d)
    assert res.status is Status.OPTIMAL
    assert res.bound == pytest.approx(1.0, abs=1e-6)


def test_constant_objective_bisection():
    res = upper_bound_dual_bisection(Signomial({(0,): 1.0}, 1), TOY_RING, TOY_BOX, 1)
    assert res.bound == pytest.approx(1.0, abs=1e-5)


def test_toy_levels_monotone_and_valid():
    vals = []
    for d in (1, 2):
        res = upper_bound_primal(TOY_F, TOY_RING, TOY_BOX, d)
        assert res.trusted
        vals.append(res.bound)
    assert vals[0] >= -0.25 and vals[1] >= -0.25
    assert vals[1] <= vals[0] + 1e-8


def test_density_normalized():
    res = upper_bound_primal(TOY_F, TOY_RING, TOY_BOX, 2)
    assert res.mass == pytest.approx(1.0, abs=1e-8)
    assert all(v.passed for v in res.verification)


def test_neg_exp_decreasing_toward_minus_e():
    prev = math.inf
    for d in (1, 2, 3):
        res = upper_bound_primal(NEG_EXP, NEG_RING, UNIT, d)
        assert res.trusted
        assert res.bound >= -math.e - 1e-9
        assert res.bound <= prev + 1e-8
        prev = res.bound


def test_primal_dual_agree_toy_d2():
    p = upper_bound_primal(TOY_F, TOY_RING, TOY_BOX, 2)
    q = upper_bound_dual_bisection(TOY_F, TOY_RING, TOY_BOX, 2)
    assert q.status is Status.OPTIMAL
    assert abs(p.bound - q.bound) <= 1e-4 * abs(p.bound)


def test_membership_accepts_below_bound():
    p = upper_bound_primal(TOY_F, TOY_RING, TOY_BOX, 2)
    assert dual_membership(p.bound - 1.0, TOY_F, TOY_RING, TOY_BOX, 2) is Status.OPTIMAL
    assert dual_membership(p.bound + 1.0, TOY_F, TOY_RING, TOY_BOX, 2) is Status.PRIMAL_INFEASIBLE


def test_level0_valid_upper_bound():
    res = upper_bound_primal(TOY_F, TOY_RING, TOY_BOX, 2, mode=LEVEL0)
    assert res.trusted and res.bound >= -0.25


def test_rank_deficient_ring_refused():
    ring = SignomialRing([(0, 0), (1, 1)])
    with pytest.raises(NonInjectiveRing):
        upper_bound_primal(Signomial({(1, 1): 1.0}, 2), ring, BoxMeasure((0.0, 0.0), (1.0, 1.0)), 1)


def test_level_must_be_positive():
    with pytest.raises(ValueError):
        upper_bound_primal(TOY_F, TOY_RING, TOY_BOX, 0)
