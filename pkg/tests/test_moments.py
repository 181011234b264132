import math

import numpy as np
import pytest
from scipy import integrate

from sigring.moments import BoxMeasure, MomentOverflow, MomentSequence, box_moment, localize
from sigring.ring import Signomial, SignomialRing


def quad_factor(a, lo, hi):
    val, _ = integrate.quad(lambda x: math.exp(a * x), lo, hi, epsabs=0, epsrel=1e-13, limit=200)
    return val / (hi - lo)


def test_origin_moment_is_one():
    assert box_moment(BoxMeasure((-2.0, 0.0), (1.0, 3.0)), (0, 0)) == 1.0


def test_unit_interval():
    assert box_moment(BoxMeasure((0.0,), (1.0,)), (1,)) == pytest.approx(math.e - 1, rel=1e-15)


def test_unit_square_against_2d_quadrature():
    val = box_moment(BoxMeasure((0.0, 0.0), (1.0, 1.0)), (1, 1))
    assert val == pytest.approx((math.e - 1) ** 2, rel=1e-15)
    q, _ = integrate.dblquad(lambda y, x: math.exp(x + y), 0, 1, 0, 1, epsabs=0, epsrel=1e-13)
    assert abs(val - q) <= 1e-10 * q


def test_random_moments_match_quadrature():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        lo = rng.uniform(-3, 2, size=n)
        hi = lo + rng.uniform(0.1, 3, size=n)
        # keep |a (u - l)| <= 50
        a = rng.uniform(-1, 1, size=n) * 50 / (hi - lo) * rng.random(n)
        m = BoxMeasure(tuple(lo), tuple(hi))
        val = box_moment(m, tuple(float(v) for v in a))
        ref = math.prod(quad_factor(ai, l, u) for ai, l, u in zip(a, lo, hi))
        worst = max(worst, abs(val - ref) / ref)
    assert worst <= 1e-10


def test_overflow_cap():
    with pytest.raises(MomentOverflow):
        box_moment(BoxMeasure((0.0,), (800.0,)), (1,))


def test_moments_positive_and_cached():
    y = MomentSequence(BoxMeasure((-1.0,), (2.0,)))
    vals = [y[(k,)] for k in range(-3, 4)]
    assert all(v > 0 for v in vals)
    assert (2,) in y._cache


def test_riesz_of_posynomial_positive():
    y = MomentSequence(BoxMeasure((-1.0,), (2.0,)))
    assert y.riesz(Signomial({(0,): 0.1, (3,): 2.0, (-1,): 1.0}, 1)) > 0


def test_localizer_constant_is_truncation():
    ring = SignomialRing([(0,), (1,), (2,)])
    y = MomentSequence(BoxMeasure((-1.0,), (1.0,)))
    L = localize(y, ring, Signomial({(0,): 1.0}, 1), 2)
    assert np.allclose(L.dense(), [y[a] for a in ring.sorted_lattice(2)], rtol=1e-15)


def test_localizer_exp_on_unit_interval():
    ring = SignomialRing([(0,), (1,)])
    y = MomentSequence(BoxMeasure((0.0,), (1.0,)))
    L = localize(y, ring, Signomial({(1,): 1.0}, 1), 1)
    assert L.dense() == pytest.approx([math.e - 1, (math.e ** 2 - 1) / 2], rel=1e-14)


def test_localizer_linear():
    rng = np.random.default_rng(3)
    ring = SignomialRing([(0, 0), (1, 0), (0, 1)])
    y = MomentSequence(BoxMeasure((-1.0, 0.0), (0.5, 1.0)))
    for _ in range(5):
        f = Signomial({(int(a), int(b)): float(c) for a, b, c in rng.integers(-2, 3, size=(3, 3))} or {(0, 0): 1.0}, 2)
        g = Signomial({(1, 1): 1.5, (0, 0): -0.5}, 2)
        if f.is_zero() or (f + g).is_zero():
            continue
        lhs = localize(y, ring, f + g, 2).dense()
        rhs = localize(y, ring, f, 2).dense() + localize(y, ring, g, 2).dense()
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_localizer_log_scale():
    ring = SignomialRing([(0,), (1,)])
    y = MomentSequence(BoxMeasure((0.0,), (1.0,)))
    L = localize(y, ring, Signomial({(720,): 1.0}, 1), 1)
    assert L.log_scale > 0 and np.all(np.isfinite(L.values))
