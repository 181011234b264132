"""Brute-force checks: grid minimization with local polish, and coefficient identity tests."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .lower import ProblemInstance
from .ring import Signomial

log = logging.getLogger(__name__)

NO_FEASIBLE_POINT = "NO_FEASIBLE_POINT"
FOUND = "FOUND"
DEFAULT_BUDGET = 10**7
CHUNK = 1 << 16


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid ``counts[i]`` points per coordinate over ``[lower, upper]``."""

    counts: Tuple[int, ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    tol: float = 1e-6
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        counts = tuple(int(k) for k in self.counts)
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if not (len(counts) == len(lo) == len(hi)):
            raise ValueError("counts and bounds differ in length")
        if any(k < 1 for k in counts):
            raise ValueError("each coordinate needs at least one grid point")
        if not all(math.isfinite(a) and math.isfinite(b) and a <= b for a, b in zip(lo, hi)):
            raise ValueError("grid bounds must be finite with lower <= upper")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if math.prod(counts) > self.budget:
            raise ValueError(f"grid has {math.prod(counts)} points, budget is {self.budget}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, lower, upper, per_dim: int, **kw) -> "GridSpec":
        return cls((per_dim,) * len(lower), tuple(lower), tuple(upper), **kw)

    @classmethod
    def for_problem(cls, p: ProblemInstance, per_dim: int, **kw) -> "GridSpec":
        """Grid over the bounding box of ``p.X``; needs ``X`` bounded."""
        lo, hi = p.X.bounding_box()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("grid oracle needs a bounded X or an explicit box")
        counts = tuple(1 if l == u else per_dim for l, u in zip(lo, hi))
        return cls(counts, tuple(lo), tuple(hi), **kw)

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    def axes(self) -> List[np.ndarray]:
        return [np.linspace(l, u, k) if k > 1 else np.array([0.5 * (l + u)])
                for k, l, u in zip(self.counts, self.lower, self.upper)]

    def points(self, start: int, stop: int) -> np.ndarray:
        """Grid points with flat (C-order) indices ``start <= i < stop``."""
        idx = np.unravel_index(np.arange(start, stop), self.counts)
        return np.column_stack([ax[i] for ax, i in zip(self.axes(), idx)])


@dataclass
class OracleResult:
    status: str
    x: Optional[np.ndarray] = None
    value: float = math.inf
    violation: float = math.nan
    grid_value: float = math.inf
    grid_x: Optional[np.ndarray] = None
    evaluated: int = 0
    feasible_points: int = 0
    polished: List[Tuple[str, float]] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.status == FOUND


def _violations(p: ProblemInstance, pts: np.ndarray) -> np.ndarray:
    v = np.zeros(pts.shape[0])
    if p.X.m:
        v = np.maximum(v, np.max(-(pts @ p.X.G.T + p.X.h), axis=1))
    for g in p.ineqs:
        v = np.maximum(v, -g.eval(pts))
    for e in p.eqs:
        v = np.maximum(v, np.abs(e.eval(pts)))
    return v


def grid_minimize(p: ProblemInstance, spec: GridSpec, polish: int = 10, local: bool = True) -> OracleResult:
    """Minimize ``p.f`` over grid points feasible within ``spec.tol / 2``.

    The best ``polish`` grid points are then refined by a bounded pattern
    search that only accepts feasible moves, followed by SLSQP; a refined
    point replaces the grid answer only when it is feasible at the same
    threshold.  Identical specs give identical output.
    """
    if spec.n != p.n:
        raise ValueError("grid and problem dimensions differ")
    thr = 0.5 * spec.tol
    best_vals: List[float] = []
    best_pts: List[np.ndarray] = []
    nfeas = 0
    for start in range(0, spec.size, CHUNK):
        pts = spec.points(start, min(spec.size, start + CHUNK))
        ok = _violations(p, pts) <= thr
        nfeas += int(ok.sum())
        if not ok.any():
            continue
        pts = pts[ok]
        vals = p.f.eval(pts)
        # stable sort keeps index order among ties
        order = np.argsort(vals, kind="stable")[:max(polish, 1)]
        best_vals.extend(vals[order].tolist())
        best_pts.extend(pts[order])
        if len(best_vals) > 4 * max(polish, 1):
            keep = np.argsort(np.array(best_vals), kind="stable")[:max(polish, 1)]
            best_vals = [best_vals[i] for i in keep]
            best_pts = [best_pts[i] for i in keep]
    res = OracleResult(NO_FEASIBLE_POINT, evaluated=spec.size, feasible_points=nfeas)
    if not best_vals:
        return res
    keep = np.argsort(np.array(best_vals), kind="stable")[:max(polish, 1)]
    starts = [best_pts[i] for i in keep]
    res.status = FOUND
    res.grid_x = starts[0].copy()
    res.grid_value = best_vals[keep[0]]
    res.x, res.value = res.grid_x.copy(), res.grid_value
    if local and polish > 0:
        lo, hi = np.array(spec.lower), np.array(spec.upper)
        for x0 in starts:
            x1 = _pattern_search(p, x0, lo, hi, thr)
            cand = [("pattern", x1)]
            x2 = _slsqp(p, x1, lo, hi, thr)
            if x2 is not None:
                cand.append(("slsqp", x2))
            for tag, xc in cand:
                val = p.f.eval(xc)
                res.polished.append((tag, val))
                if val < res.value and p.violation(xc) <= thr:
                    res.x, res.value = xc, val
    res.violation = p.violation(res.x)
    return res


def _pattern_search(p: ProblemInstance, x0, lo, hi, thr, step: float = 0.25, min_step: float = 1e-10,
                    max_evals: int = 20000) -> np.ndarray:
    """Coordinate descent with step halving; moves are clipped to the box and rejected if infeasible."""
    x = np.array(x0, dtype=float)
    fx = p.f.eval(x)
    width = np.where(hi > lo, hi - lo, 0.0)
    h = step
    evals = 0
    while h > min_step and evals < max_evals:
        improved = False
        for i in range(x.size):
            if width[i] == 0:
                continue
            for sgn in (1.0, -1.0):
                y = x.copy()
                y[i] = min(hi[i], max(lo[i], y[i] + sgn * h * width[i]))
                if y[i] == x[i]:
                    continue
                evals += 1
                fy = p.f.eval(y)
                if fy < fx and p.violation(y) <= thr:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            h *= 0.5
    return x


def _slsqp(p: ProblemInstance, x0, lo, hi, thr) -> Optional[np.ndarray]:
    from scipy import optimize

    # SLSQP is sensitive to scale: constraints go to unit peak coefficient,
    # the objective to unit magnitude at the start point
    cons = []
    if p.X.m:
        cons.append({"type": "ineq", "fun": lambda x: p.X.G @ x + p.X.h})
    for g in p.ineqs:
        cons.append({"type": "ineq", "fun": (lambda g: lambda x: g.eval(x))(_unit(g))})
    for e in p.eqs:
        cons.append({"type": "eq", "fun": (lambda e: lambda x: e.eval(x))(_unit(e))})
    bounds = list(zip(lo, hi))
    s = max(abs(p.f.eval(x0)), 1e-300)
    try:
        out = optimize.minimize(lambda x: p.f.eval(x) / s, np.asarray(x0, float), method="SLSQP", bounds=bounds,
                                constraints=cons, options={"ftol": 1e-15, "maxiter": 1000})
    except (ValueError, FloatingPointError) as exc:  # pragma: no cover - scipy edge cases
        log.debug("SLSQP polish failed: %s", exc)
        return None
    x = np.clip(out.x, lo, hi)
    if not np.all(np.isfinite(x)) or p.violation(x) > thr:
        return None
    return x


def _unit(g: Signomial) -> Signomial:
    return g.scale(1.0 / max(abs(c) for c in g.terms.values())) if not g.is_zero() else g


@dataclass
class IdentityReport:
    equal: bool
    discrepancy: float
    worst: Optional[tuple] = None

    def __bool__(self):
        return self.equal


def identity_check(lhs: Signomial, rhs: Signomial, tol: float = 1e-9) -> IdentityReport:
    """Coefficient-wise comparison: equal iff ``max |diff| <= tol * (1 + max |coefficient|)``."""
    if lhs.n != rhs.n:
        raise ValueError("signomials have different dimensions")
    keys = set(lhs.terms) | set(rhs.terms)
    worst, disc = None, 0.0
    for a in sorted(keys):
        dv = abs(lhs.coefficient(a) - rhs.coefficient(a))
        if dv > disc:
            disc, worst = dv, a
    scale = max([abs(c) for c in lhs.terms.values()] + [abs(c) for c in rhs.terms.values()] + [0.0])
    return IdentityReport(disc <= tol * (1.0 + scale), disc, worst)


def oracle_value(p: ProblemInstance, per_dim: int = 20, tol: float = 1e-6, **kw) -> OracleResult:
    """Shorthand: grid over the bounding box of ``p.X``."""
    return grid_minimize(p, GridSpec.for_problem(p, per_dim, tol=tol), **kw)
