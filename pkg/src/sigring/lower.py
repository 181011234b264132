"""A-degree SAGE lower bounds for constrained signomial minimization."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .affine import AffineSignomial
from .cones import (
    AgeWitness,
    PolyhedralSet,
    Reduction,
    SageBlock,
    SageCertificate,
    VerificationReport,
    add_sage_constraint,
    extract_certificate,
    refresh_witnesses,
    verify_certificate,
)
from .ring import Exponent, Signomial, SignomialRing, exponent_matrix
from .solver import ConicBuilder, ConicProblem, SolverOptions, Status, linprog, solve

log = logging.getLogger(__name__)


@dataclass
class ProblemInstance:
    """Minimize ``f`` over ``{x in X : g(x) >= 0 (g in ineqs), e(x) = 0 (e in eqs)}``."""

    ring: SignomialRing
    f: Signomial
    ineqs: List[Signomial] = field(default_factory=list)
    eqs: List[Signomial] = field(default_factory=list)
    X: Optional[PolyhedralSet] = None
    ineq_names: Optional[List[str]] = None
    eq_names: Optional[List[str]] = None

    def __post_init__(self):
        n = self.f.n
        if self.X is None:
            self.X = PolyhedralSet.whole_space(n)
        for g in list(self.ineqs) + list(self.eqs):
            if g.n != n:
                raise ValueError("all signomials must share one dimension")
        if self.ring.n != n or self.X.n != n:
            raise ValueError("ring, set and objective dimensions differ")
        if self.ineq_names is None:
            self.ineq_names = [f"g{i}" for i in range(len(self.ineqs))]
        if self.eq_names is None:
            self.eq_names = [f"e{i}" for i in range(len(self.eqs))]

    @property
    def n(self) -> int:
        return self.f.n

    def shift(self, b) -> "ProblemInstance":
        """Translated data ``f(x - b)``, ``g(x - b)`` over ``X + b``; same optimal value."""
        b = np.asarray(b, dtype=float)
        return ProblemInstance(self.ring, self.f.shift(b), [g.shift(b) for g in self.ineqs],
                               [e.shift(b) for e in self.eqs], self.X.shift(b),
                               list(self.ineq_names), list(self.eq_names))

    def violation(self, x) -> float:
        """Largest constraint violation at ``x`` (including membership in ``X``)."""
        x = np.asarray(x, dtype=float)
        v = 0.0
        if self.X.m:
            v = max(v, float(np.max(-(self.X.G @ x + self.X.h))))
        for g in self.ineqs:
            v = max(v, -g.eval(x))
        for e in self.eqs:
            v = max(v, abs(e.eval(x)))
        return max(v, 0.0)

    def feasible(self, x, tol: float = 1e-8) -> bool:
        return self.violation(x) <= tol


@dataclass
class LowerBoundResult:
    level: int
    bound: float
    status: Status
    certificate: Optional[SageCertificate] = None
    lagrangian: Optional[Signomial] = None
    multipliers: Dict[str, Signomial] = field(default_factory=dict)
    dual_moments: Optional[np.ndarray] = None
    moment_support: List[Exponent] = field(default_factory=list)
    verification: Optional[VerificationReport] = None
    shift: Optional[np.ndarray] = None
    reduction: Optional[Reduction] = None
    dropped: List[str] = field(default_factory=list)
    stats: Dict[str, float] = field(default_factory=dict)

    @property
    def trusted(self) -> bool:
        return self.verification is not None and self.verification.passed

    @property
    def r(self) -> int:
        return int(self.stats.get("r", 0))


@dataclass
class LowerRelaxation:
    problem: ConicProblem
    gamma: int
    sage: SageBlock
    multiplier_blocks: Dict[str, tuple]
    level: int
    r: int
    dropped: List[str]
    weight: Signomial


_POWER_CACHE: Dict[tuple, Signomial] = {}


def _ring_power(ring: SignomialRing, r: int) -> Signomial:
    key = (id(ring), ring.ground_set, r)
    hit = _POWER_CACHE.get(key)
    if hit is None:
        hit = ring.total() ** r if r else Signomial.constant(1.0, ring.n)
        _POWER_CACHE[key] = hit
    return hit


class DegreeExceeded(ValueError):
    pass


def build_lower_relaxation(p: ProblemInstance, d: int, reduce_fixed: bool = True) -> LowerRelaxation:
    """Assemble ``max gamma`` s.t. ``W (f - gamma) - sum lambda_g g`` is X-SAGE, ``W = (sum e^a)^r``."""
    ring = p.ring
    deg_f = ring.degree(p.f)
    if d < deg_f:
        raise DegreeExceeded(f"level {d} is below the A-degree {deg_f} of the objective")
    r = d - deg_f
    W = _ring_power(ring, r)
    B = ConicBuilder()
    gamma = int(B.free(1)[0])
    expr = AffineSignomial.from_signomial(W * p.f)
    expr.add_scaled_signomial(W, var=gamma, weight=-1.0)
    mult: Dict[str, tuple] = {}
    dropped: List[str] = []
    for name, g in zip(p.ineq_names, p.ineqs):
        S = ring.invsupp(g, d)
        if not S:
            log.warning("constraint %s has empty invsupp at level %d; dropped", name, d)
            dropped.append(name)
            continue
        lam = B.free(len(S))
        lam_expr = AffineSignomial.from_variables(S, lam, p.n)
        add_sage_constraint(B, lam_expr, p.X, reduce_fixed=reduce_fixed)
        expr.add_product(S, lam, g, weight=-1.0)
        mult[name] = (S, lam)
    for name, e in zip(p.eq_names, p.eqs):
        S = ring.invsupp(e, d)
        if not S:
            log.warning("constraint %s has empty invsupp at level %d; dropped", name, d)
            dropped.append(name)
            continue
        mu = B.free(len(S))
        expr.add_product(S, mu, e, weight=-1.0)
        mult[name] = (S, mu)
    sage = add_sage_constraint(B, expr, p.X, reduce_fixed=reduce_fixed)
    B.set_objective({gamma: -1.0})
    return LowerRelaxation(B.build(), gamma, sage, mult, d, r, dropped, W)


def recenter_vector(X: PolyhedralSet) -> Optional[np.ndarray]:
    """Shift moving the bounding-box midpoint to the origin, or None if unbounded."""
    lo, hi = X.bounding_box()
    if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
        return -(lo + hi) / 2.0
    return None


def _normalized(p: ProblemInstance):
    """Divide ``f`` and each constraint by its largest coefficient magnitude."""
    def peak(s):
        return max(abs(c) for c in s.terms.values()) if not s.is_zero() else 1.0

    sf = peak(p.f)
    sg = {nm: peak(g) for nm, g in zip(p.ineq_names + p.eq_names, p.ineqs + p.eqs)}
    q = ProblemInstance(p.ring, p.f.scale(1.0 / sf),
                        [g.scale(1.0 / sg[nm]) for nm, g in zip(p.ineq_names, p.ineqs)],
                        [e.scale(1.0 / sg[nm]) for nm, e in zip(p.eq_names, p.eqs)],
                        p.X, list(p.ineq_names), list(p.eq_names))
    return q, sf, sg


def solve_lower(p: ProblemInstance, d: int, opts: Optional[SolverOptions] = None,
                recenter: bool = True, normalize: bool = True, reduce_fixed: bool = True,
                verify: bool = True, samples: int = 1000) -> LowerBoundResult:
    """Level-``d`` bound with an independently verified certificate.

    ``recenter`` moves the bounding-box midpoint of ``X`` to the origin and
    ``normalize`` rescales every signomial to unit peak coefficient; neither
    changes the bound.  ``reduce_fixed`` substitutes coordinates pinned by
    ``X`` inside the SAGE constraints, which can only tighten the bound.
    """
    t0 = time.perf_counter()
    deg_f = p.ring.degree(p.f)
    if d < deg_f:
        return LowerBoundResult(d, -math.inf, Status.OPTIMAL, stats={"r": d - deg_f})
    b = recenter_vector(p.X) if recenter else None
    q = p.shift(b) if b is not None else p
    q, sf, sg = _normalized(q) if normalize else (q, 1.0, {})
    rel = build_lower_relaxation(q, d, reduce_fixed=reduce_fixed)
    t_build = time.perf_counter() - t0
    sol = solve(rel.problem, opts)
    stats = {
        "r": rel.r,
        "build_time": t_build,
        "solve_time": sol.solve_time,
        "iterations": sol.iterations,
        "num_vars": rel.problem.num_vars,
        "num_rows": rel.problem.num_eq,
        "exp_cones": sum(1 for k, _ in rel.problem.cones if k == "EXP"),
        "lattice_size": len(rel.sage.support),
    }
    res = LowerBoundResult(d, math.nan, sol.status, shift=b, dropped=rel.dropped, stats=stats)
    if sol.status is Status.PRIMAL_INFEASIBLE:
        res.bound = -math.inf
        return res
    if sol.status is Status.DUAL_INFEASIBLE:
        # unbounded gamma: the feasible set is empty
        res.bound = math.inf
        return res
    if sol.x is None:
        return res
    x = sol.x
    if sol.status is not Status.OPTIMAL:
        # an unconverged iterate is no bound; keep it only for diagnostics
        stats["raw_bound"] = float(x[rel.gamma]) * sf
        stats["total_time"] = time.perf_counter() - t0
        return res
    res.bound = float(x[rel.gamma]) * sf
    cert = extract_certificate(rel.sage, x)
    # AGE conditions are positively homogeneous, so rescaling keeps the witnesses valid
    cert.summands = [(c * sf, AgeWitness(w.beta, w.nu * sf, w.lp_dual * sf, w.slack * sf))
                     for c, w in cert.summands]
    cert.shift = b
    L_local = (rel.sage.source or rel.sage.expr).evaluate(x).scale(sf)
    res.lagrangian = L_local.shift(-b) if b is not None else L_local
    res.certificate = cert
    for name, (S, idx) in rel.multiplier_blocks.items():
        lam = Signomial(dict(zip(S, (x[idx] * (sf / sg.get(name, 1.0))).tolist())), p.n)
        res.multipliers[name] = lam.shift(-b) if b is not None else lam
    res.moment_support = list(rel.sage.support)
    res.reduction = rel.sage.reduction
    if sol.y is not None and not rel.sage.trivial:
        res.dual_moments = rel.sage.dual_moments(sol)
    if verify:
        res.verification = verify_certificate(res.lagrangian, cert, p.X, samples=samples)
        if not res.verification.passed and res.verification.failed_summands:
            stats["refreshed"] = len(set(res.verification.failed_summands))
            cert = refresh_witnesses(cert, p.X, res.verification.failed_summands, opts)
            res.certificate = cert
            res.verification = verify_certificate(res.lagrangian, cert, p.X, samples=samples)
        if not res.verification.passed:
            log.warning("level %d certificate failed verification: %s", d, res.verification.violations)
    stats["total_time"] = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# solution recovery


@dataclass
class Candidate:
    x: np.ndarray
    value: float
    violation: float
    source: str


def _recovery_lp(v, Amat, bi, X: PolyhedralSet, keep):
    """Tightest point ``z`` with ``<a - beta, z> <= v_b log(v_a / v_b)`` and ``z / v_b`` in X."""
    vb = v[bi]
    rows = [i for i in keep if i != bi]
    D = Amat[rows] - Amat[bi]
    rhs = vb * np.log(v[rows] / vb)
    n = Amat.shape[1]
    k = len(rows)
    # variables (z, s): D z - s <= rhs, -G z <= h vb, s >= 0
    A_ub = np.zeros((k + X.m + k, n + k))
    b_ub = np.zeros(k + X.m + k)
    A_ub[:k, :n] = D
    A_ub[:k, n:] = -np.eye(k)
    b_ub[:k] = rhs
    if X.m:
        A_ub[k:k + X.m, :n] = -X.G
        b_ub[k:k + X.m] = X.h * vb
    A_ub[k + X.m:, n:] = -np.eye(k)
    # total gap sum(rhs - D z) + 2 sum(s) is bounded below and vanishes at z = v_b x*
    c = np.concatenate([-D.sum(axis=0), 2.0 * np.ones(k)])
    _, sol = linprog(c, A_ub=A_ub, b_ub=b_ub)
    if sol is None:
        return None
    return sol[:n] / vb


def recover_solutions(result: LowerBoundResult, p: ProblemInstance, tol: float = 1e-9,
                      max_points: int = 10, dedup_tol: float = 1e-6,
                      feas_tol: float = 1e-5) -> List[Candidate]:
    """Candidate minimizers read off the dual moments, ranked by (violation, value).

    Violations below ``feas_tol`` count as zero in the ranking.
    """
    v = result.dual_moments
    if v is None or not len(v):
        return []
    supp = result.moment_support
    if v.max() <= 0 and v.min() < 0:
        v = -v
    vmax = float(np.max(v))
    if vmax <= tol:
        return []
    b = result.shift if result.shift is not None else np.zeros(p.n)
    Xs = p.X.shift(b)
    red = result.reduction
    if red is not None:
        Xs = red.polyhedron(Xs)
    Amat = exponent_matrix(supp, Xs.n)
    keep = [i for i in range(len(v)) if v[i] > tol * vmax]
    raw: List[tuple] = []
    # log-linear fit against the origin moment
    zero = tuple(0 for _ in range(Xs.n))
    idx0 = supp.index(zero) if zero in supp else None
    if idx0 is not None and v[idx0] > tol * vmax:
        Ak = Amat[keep]
        rhs = np.log(v[keep] / v[idx0])
        x_ls = np.linalg.lstsq(Ak, rhs, rcond=None)[0]
        raw.append((x_ls, "lstsq"))
    # one recovery LP per sufficiently large v_beta
    order = sorted(keep, key=lambda i: -v[i])
    for bi in order:
        try:
            x = _recovery_lp(v, Amat, bi, Xs, keep)
        except Exception:  # numerical trouble in one LP should not abort recovery
            x = None
        if x is not None:
            raw.append((x, f"age-lp:{bi}"))
    lo, hi = Xs.bounding_box()
    out: List[Candidate] = []
    for x, src in raw:
        x = np.clip(x, lo, hi)
        xo = (red.lift(x) if red is not None else x) - b
        if not np.all(np.isfinite(xo)):
            continue
        if any(np.max(np.abs(c.x - xo)) <= dedup_tol * (1 + np.max(np.abs(xo))) for c in out):
            continue
        out.append(Candidate(xo, float(p.f.eval(xo)), p.violation(xo), src))
    out.sort(key=lambda c: (c.violation if c.violation > feas_tol else 0.0, c.value))
    return out[:max_points]
