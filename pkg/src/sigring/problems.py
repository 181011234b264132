"""Built-in benchmark instances in log-domain form (``t = exp x``)."""
from __future__ import annotations

import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .cones import PolyhedralSet
from .lower import ProblemInstance
from .ring import Signomial, SignomialRing, zero_exponent

Term = Tuple[float, Sequence[int]]


def _sig(terms: Sequence[Term], n: int) -> Signomial:
    acc: Dict[tuple, float] = {}
    for c, a in terms:
        a = tuple(a)
        acc[a] = acc.get(a, 0.0) + c
    return Signomial(acc, n)


def _mono(n: int, **powers) -> tuple:
    e = [0] * n
    for k, p in powers.items():
        e[int(k[1:]) - 1] = p
    return tuple(e)


def toy_problem() -> ProblemInstance:
    """``e^{2x} - e^x`` on the real line; minimum ``-1/4`` at ``x = -log 2``."""
    f = Signomial({(2,): 1.0, (1,): -1.0}, 1)
    ring = SignomialRing([(0,), (1,), (2,)])
    return ProblemInstance(ring, f, X=PolyhedralSet.whole_space(1))


# five-variable nonconvex benchmark (quadratic objective, bilinear constraints)
FIVE_VAR_LOWER = (78.0, 33.0, 27.0, 27.0, 27.0)
FIVE_VAR_UPPER = (102.0, 45.0, 45.0, 45.0, 45.0)
FIVE_VAR_OPTIMUM = (78.0, 33.0, 29.99574, 45.0, 36.77533)
FIVE_VAR_VALUE = 10122.4932


def five_var_data():
    """Objective and tagged constraints as ``(tag, name, Signomial)`` triples."""
    n = 5
    m = lambda **k: _mono(n, **k)  # noqa: E731
    f = _sig([(5.3578, m(t3=2)), (0.8357, m(t1=1, t5=1)), (37.2393, m(t1=1))], n)
    cons = [
        ("nonconvex", "c1", _sig([(0.06663, m(t2=1, t5=1)), (-0.02584, m(t3=1, t5=1)),
                                  (0.0734, m(t1=1, t4=1)), (1000.0, m())], n)),
        ("nonconvex", "c2", _sig([(0.33085, m(t3=1, t5=1)), (-0.853007, m(t2=1, t5=1)),
                                  (-0.09395, m(t1=1, t4=1)), (1000.0, m())], n)),
        ("nonconvex", "c3", _sig([(0.4200, m(t1=1, t2=1)), (0.30586, m(t3=2)),
                                  (1.0, m(t2=1, t5=1)), (-1330.3294, m())], n)),
        ("nonconvex", "c4", _sig([(0.2668, m(t1=1, t3=1)), (0.40584, m(t3=1, t4=1)),
                                  (1.0, m(t3=1, t5=1)), (-2275.1326, m())], n)),
        ("convex", "c5", _sig([(1000.0, m()), (-0.24186, m(t2=1, t5=1)),
                               (-0.10159, m(t1=1, t2=1)), (-0.07379, m(t3=2))], n)),
        ("convex", "c6", _sig([(1000.0, m()), (-0.29955, m(t3=1, t5=1)),
                               (-0.07992, m(t1=1, t3=1)), (-0.12157, m(t3=1, t4=1))], n)),
    ]
    for i in range(n):
        e = [0] * n
        e[i] = 1
        e = tuple(e)
        cons.append(("box", f"ub{i + 1}", _sig([(FIVE_VAR_UPPER[i], m()), (-1.0, e)], n)))
        cons.append(("box", f"lb{i + 1}", _sig([(1.0, e), (-FIVE_VAR_LOWER[i], m())], n)))
    return f, cons


def five_var_problem(ring: str = "natural", exclude: Sequence[str] = ()) -> ProblemInstance:
    """The benchmark with ``X`` the log-box and constraint tags in ``exclude`` removed."""
    f, cons = five_var_data()
    kept = [(tag, name, g) for tag, name, g in cons if tag not in exclude]
    X = PolyhedralSet.box(np.log(FIVE_VAR_LOWER), np.log(FIVE_VAR_UPPER))
    if ring == "natural":
        R = SignomialRing.natural(5)
    elif ring == "naive":
        R = SignomialRing.naive([f] + [g for _, _, g in kept])
    else:
        raise ValueError(f"unknown ring {ring!r}")
    return ProblemInstance(R, f, [g for _, _, g in kept], X=X, ineq_names=[nm for _, nm, _ in kept])


# nine-variable polynomial from a reaction-network multistationarity test;
# token "abcdefghi:c" is the monomial t1^a ... t9^i with coefficient c
_CRN_TERMS = (
    "010110100:1 100110110:1 000110100:1 100110010:1 010010100:1 011000001:1 000010100:1 "
    "001000001:1 010100100:1 010001001:4 000100100:1 000001001:4 010000100:1 011010001:1 "
    "000000100:1 001010001:1 010110000:1 011000101:1 000110000:1 001000101:1 010010000:1 "
    "010101001:4 000010000:1 000101001:4 010100000:1 011010101:1 000100000:1 001010101:1 "
    "010000000:1 101000120:1 000000000:1 101000020:1 100000110:1 101000011:1 100000010:1 "
    "100001011:4 001000110:1 101000111:1 001000010:1 100101011:4 100100110:1 101010011:-1 "
    "100100010:1 101010111:-1 100010110:1 011001002:4 100010010:1 001001002:4 011000110:1 "
    "101001012:4 011000010:1"
)


def crn_objective() -> Signomial:
    terms = []
    for tok in _CRN_TERMS.split():
        e, c = tok.split(":")
        terms.append((float(c), tuple(int(ch) for ch in e)))
    return _sig(terms, 9)


def crn_set(a: float = 7.06, b: float = 2.41) -> PolyhedralSet:
    """``x5 = log a`` and ``|x_i| <= log b`` for the other rate variables; ``x8, x9`` free."""
    n = 9
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    for i in range(7):
        lo[i], hi[i] = -math.log(b), math.log(b)
    lo[4] = hi[4] = math.log(a)
    return PolyhedralSet.box(lo, hi)


def crn_ring(kind: str) -> SignomialRing:
    f = crn_objective()
    if kind == "natural":
        return SignomialRing.natural(9)
    if kind == "naive":
        return SignomialRing.naive([f])
    if kind == "intermediate":
        gens = list(SignomialRing.natural(9).ground_set) + f.negative_support()
        return SignomialRing(gens)
    raise ValueError(f"unknown ring {kind!r}")


def crn_problem(ring: str = "natural", a: float = 7.06, b: float = 2.41) -> ProblemInstance:
    return ProblemInstance(crn_ring(ring), crn_objective(), X=crn_set(a, b))
