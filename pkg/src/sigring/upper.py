"""Upper bounds from SAGE-constrained densities against a box reference measure.

Level ``d`` minimizes ``int f psi dmu`` over densities ``psi`` supported on
``A_d`` with ``int psi dmu = 1`` and ``psi = sum_{l=1..d} psi_l``, where each
``(sum_{a in A} e^a)^{d-l} psi_l`` is SAGE over the box.  Every such ``psi``
is nonnegative on the box, so the value bounds ``min f`` from above.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .affine import AffineSignomial
from .cones import (
    PolyhedralSet,
    SageCertificate,
    VerificationReport,
    add_sage_constraint,
    extract_certificate,
    verify_certificate,
)
from .moments import BoxMeasure, MomentSequence, localize
from .ring import Exponent, Signomial, SignomialRing, add_exponents, exponent_matrix
from .solver import ConicBuilder, SolverOptions, Status, solve

log = logging.getLogger(__name__)

PRIMAL = "primal"
LEVEL0 = "level0"
BISECT = "bisect"


# certificates are checked in coefficient space; pieces must also look
# nonnegative pointwise at this relative level
SAMPLE_TOL = 1e-6


class NonInjectiveRing(ValueError):
    pass


@dataclass
class UpperBoundResult:
    level: int
    bound: float
    status: Status
    mode: str = PRIMAL
    psi: Optional[Signomial] = None
    pieces: List[Signomial] = field(default_factory=list)
    certificates: List[SageCertificate] = field(default_factory=list)
    weighted: List[Signomial] = field(default_factory=list)
    verification: List[VerificationReport] = field(default_factory=list)
    mass: float = math.nan
    # smallest sampled value of any piece psi_l relative to max(1, its peak)
    sample_min: float = math.nan
    stats: Dict[str, float] = field(default_factory=dict)

    @property
    def trusted(self) -> bool:
        return (self.status is Status.OPTIMAL and bool(self.verification)
                and all(v.passed for v in self.verification) and self.sample_min >= -SAMPLE_TOL)


def _check_ring(ring: SignomialRing, f: Signomial):
    if not ring.is_injective():
        raise NonInjectiveRing("upper bounds need ground-set exponents spanning R^n")
    ring.degree(f)


def _frame(f: Signomial, box: BoxMeasure):
    """Center the box at the origin and scale ``f`` to unit peak coefficient."""
    b = -box.midpoint()
    fb = f.shift(b)
    sf = max(abs(c) for c in fb.terms.values())
    return fb.scale(1.0 / sf), box.shift(b), b, sf


def _weights(ring: SignomialRing, k: int) -> Signomial:
    return ring.total() ** k if k else Signomial.constant(1.0, ring.n)


def box_set(box: BoxMeasure) -> PolyhedralSet:
    return PolyhedralSet.box(box.lower, box.upper)


def upper_bound_primal(f: Signomial, ring: SignomialRing, box: BoxMeasure, d: int,
                       mode: str = PRIMAL, opts: Optional[SolverOptions] = None,
                       verify: bool = True, samples: int = 2000) -> UpperBoundResult:
    """Level-``d`` upper bound on ``min_{box} f``; ``mode="level0"`` keeps only ``psi`` SAGE itself."""
    if d < 1:
        raise ValueError("level must be at least 1")
    _check_ring(ring, f)
    t0 = time.perf_counter()
    fn, boxc, b, sf = _frame(f, box)
    K = box_set(boxc)
    y = MomentSequence(boxc)
    Ad = ring.sorted_lattice(d)
    obj = localize(y, ring, fn, d, support=Ad).dense()
    mass = np.array([y[a] for a in Ad])

    B = ConicBuilder()
    levels = [d] if mode == LEVEL0 else list(range(1, d + 1))
    blocks = []
    # a density term c e^a carries mass c y_a, so 1/y_a is its natural unit
    unit = lambda a: 1.0 / y[a]  # noqa: E731
    for ell in levels:
        z = B.free(len(Ad))
        B.set_scale(z, [unit(a) for a in Ad])
        k = 0 if mode == LEVEL0 else d - ell
        expr = AffineSignomial(ring.n, {})
        expr.add_product(Ad, z, _weights(ring, k))
        support = ring.sorted_lattice(d + k) if k else Ad
        sb = add_sage_constraint(B, expr, K, support=support, force_blocks=support, scale=unit)
        blocks.append((ell, z, sb, k))
    terms_obj: Dict[int, float] = {}
    terms_mass: Dict[int, float] = {}
    for _, z, _, _ in blocks:
        for j, (co, ma) in enumerate(zip(obj, mass)):
            terms_obj[int(z[j])] = co
            terms_mass[int(z[j])] = ma
    B.add_row(terms_mass, 1.0)
    B.set_objective(terms_obj)
    prob = B.build()
    sol = solve(prob, opts)
    stats = {"solve_time": sol.solve_time, "iterations": sol.iterations, "num_vars": prob.num_vars,
             "exp_cones": sum(1 for kind, _ in prob.cones if kind == "EXP"), "lattice_size": len(Ad)}
    res = UpperBoundResult(d, math.nan, sol.status, mode=mode, stats=stats)
    if sol.x is None:
        return res
    x = sol.x
    res.bound = float(obj @ sum(x[z] for _, z, _, _ in blocks)) * sf
    total = np.zeros(len(Ad))
    for ell, z, sb, k in blocks:
        coef = x[z]
        total += coef
        piece = Signomial(dict(zip(Ad, coef.tolist())), ring.n)
        res.pieces.append(piece.shift(-b))
        weighted = _weights(ring, k) * piece
        cert = extract_certificate(sb, x)
        cert.shift = b
        res.weighted.append(weighted.shift(-b))
        res.certificates.append(cert)
    res.mass = float(mass @ total)
    res.psi = Signomial(dict(zip(Ad, total.tolist())), ring.n).shift(-b)
    if verify:
        Kfull = box_set(box)
        res.verification = [verify_certificate(w, c, Kfull) for w, c in zip(res.weighted, res.certificates)]
        pts = _box_samples(boxc, samples)
        worst = math.inf
        for ell, z, _, _ in blocks:
            vals = np.exp(pts @ exponent_matrix(Ad, ring.n).T) @ x[z]
            worst = min(worst, float(vals.min()) / max(1.0, float(np.abs(vals).max())))
        res.sample_min = worst
    stats["total_time"] = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# dual side


@dataclass
class BisectionResult:
    level: int
    bound: float
    interval: Tuple[float, float]
    status: Status
    steps: int
    history: List[Tuple[float, bool]] = field(default_factory=list)


def _dual_membership_problem(v: np.ndarray, ring: SignomialRing, d: int, K: PolyhedralSet,
                             y: Optional[MomentSequence] = None, margin: Optional[np.ndarray] = None):
    """Conic system for ``v`` in the dual of the level-``d`` density cone.

    For each ``l``: ``v_a = sum_k w_{l,k} u_{a+k}`` on ``A_d`` with ``u`` in the
    dual K-SAGE cone over ``A_{2d-l}``.  With ``margin`` the right-hand side
    becomes ``v - t * margin`` and ``t <= 1`` is maximized; the returned
    index marks ``t``.  Moments ``y`` (when given) set the variable units.
    """
    Ad = ring.sorted_lattice(d)
    B = ConicBuilder()
    n = ring.n
    t_idx = None
    if margin is not None:
        t_idx = int(B.free(1)[0])
        cap = B.nonneg(1)
        B.add_row({t_idx: 1.0, int(cap[0]): 1.0}, 1.0)
        B.set_objective({t_idx: -1.0})
    else:
        B.set_objective({})
    rows: Dict[Exponent, Dict[int, float]] = {a: {} for a in Ad}
    for ell in range(1, d + 1):
        k = d - ell
        W = _weights(ring, k)
        supp = ring.sorted_lattice(d + k) if k else Ad
        idx = {a: i for i, a in enumerate(supp)}
        m = len(supp)
        u = B.nonneg(m)
        unit = np.array([y[a] for a in supp]) if y is not None else np.ones(m)
        B.set_scale(u, unit)
        for i, a in enumerate(Ad):
            terms: Dict[int, float] = {}
            for kap, w in W.terms.items():
                j = idx[add_exponents(a, kap)]
                terms[int(u[j])] = terms.get(int(u[j]), 0.0) + w
            if t_idx is not None:
                terms[t_idx] = float(margin[i])
            B.add_row(terms, float(v[i]))
        A = exponent_matrix(supp, n)
        for bi in range(m):
            z = B.free(n)
            others = [i for i in range(m) if i != bi]
            trip = B.exp_cones(len(others))
            for t, i in enumerate(others):
                B.set_scale(trip[t], math.sqrt(unit[bi] * unit[i]))
                # (<a - beta, z>, u_beta, u_a) in EXP
                row = {int(trip[t, 0]): 1.0}
                for j in range(n):
                    g = A[i, j] - A[bi, j]
                    if g:
                        row[int(z[j])] = -g
                B.add_row(row, 0.0)
                B.add_row({int(trip[t, 1]): 1.0, int(u[bi]): -1.0}, 0.0)
                B.add_row({int(trip[t, 2]): 1.0, int(u[i]): -1.0}, 0.0)
            if K.m:
                s = B.nonneg(K.m)
                B.set_scale(s, unit[bi])
                for r in range(K.m):
                    row = {int(s[r]): -1.0, int(u[bi]): K.h[r]}
                    for j in range(n):
                        if K.G[r, j]:
                            row[int(z[j])] = K.G[r, j]
                    B.add_row(row, 0.0)
    return B.build(), t_idx


def dual_membership(theta: float, f: Signomial, ring: SignomialRing, box: BoxMeasure, d: int,
                    opts: Optional[SolverOptions] = None) -> Status:
    """OPTIMAL when ``V_d(f y) - theta V_d(y)`` lies in the dual cone, PRIMAL_INFEASIBLE when not."""
    fn, boxc, _, sf = _frame(f, box)
    return _membership(theta / sf, fn, ring, boxc, d, opts)


# margins this close to zero cannot be told apart from solver noise
MARGIN_TOL = 1e-9


def _membership(theta, fn, ring, boxc, d, opts):
    y = MomentSequence(boxc)
    Ad = ring.sorted_lattice(d)
    mass = np.array([y[a] for a in Ad])
    v = localize(y, ring, fn, d, support=Ad).dense() - theta * mass
    K = box_set(boxc)
    prob, _ = _dual_membership_problem(v, ring, d, K, y)
    sol = solve(prob, opts)
    if sol.status is not Status.INCONCLUSIVE:
        return sol.status
    # V_d(y) is interior to the dual cone, so the margin program is always
    # feasible and the sign of its optimum decides membership
    prob, t_idx = _dual_membership_problem(v, ring, d, K, y, margin=mass)
    sol = solve(prob, opts)
    if sol.status is Status.OPTIMAL:
        t = float(sol.x[t_idx])
        if t > MARGIN_TOL:
            return Status.OPTIMAL
        if t < -MARGIN_TOL:
            return Status.PRIMAL_INFEASIBLE
    return Status.INCONCLUSIVE


def upper_bound_dual_bisection(f: Signomial, ring: SignomialRing, box: BoxMeasure, d: int,
                               interval: Optional[Tuple[float, float]] = None,
                               opts: Optional[SolverOptions] = None, rtol: float = 1e-6,
                               max_steps: int = 200) -> BisectionResult:
    """Bisection on ``theta`` with the dual membership oracle.

    The default interval runs from a termwise lower bound of ``f`` on the box
    (always accepted) to the mean of ``f`` plus one (always rejected).
    """
    _check_ring(ring, f)
    fn, boxc, _, sf = _frame(f, box)
    if interval is None:
        corners = _corners(boxc)
        lo = sum(min(c * math.exp(float(np.dot(np.asarray(a, float), p))) for p in corners)
                 for a, c in fn.terms.items()) - 1.0
        hi = MomentSequence(boxc).riesz(fn) + 1.0
    else:
        lo, hi = interval[0] / sf, interval[1] / sf
    history = []
    steps = 0
    status = Status.OPTIMAL
    while (hi - lo) * sf >= rtol * max(1.0, abs(0.5 * (lo + hi) * sf)) and steps < max_steps:
        mid = 0.5 * (lo + hi)
        st = _membership(mid, fn, ring, boxc, d, opts)
        steps += 1
        if st is Status.OPTIMAL:
            lo = mid
            history.append((mid * sf, True))
        elif st is Status.PRIMAL_INFEASIBLE:
            hi = mid
            history.append((mid * sf, False))
        else:
            status = Status.INCONCLUSIVE
            log.warning("membership oracle inconclusive at theta=%g; stopping", mid * sf)
            break
    return BisectionResult(d, 0.5 * (lo + hi) * sf, (lo * sf, hi * sf), status, steps, history)


def _box_samples(box: BoxMeasure, k: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo, hi = np.array(box.lower), np.array(box.upper)
    pts = lo + (hi - lo) * rng.random((k, box.n))
    if box.n <= 10:
        pts = np.vstack([pts, np.array(_corners(box))])
    return pts


def _corners(box: BoxMeasure):
    """Vertices of the box; log-linear terms attain their extremes there."""
    n = box.n
    if n > 16:
        raise ValueError("default interval needs at most 16 dimensions; pass one explicitly")
    out = []
    for mask in range(1 << n):
        out.append([box.upper[i] if mask >> i & 1 else box.lower[i] for i in range(n)])
    return out
