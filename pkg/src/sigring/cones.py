"""Conditional SAGE cones over polyhedral sets.

A signomial supported on ``A`` with at most one negative coefficient (at
``beta``) is nonnegative on ``X = {x : Gx + h >= 0}`` exactly when some
``nu`` with ``<1, nu> = 0`` and ``nu_{!beta} >= 0`` satisfies

    sup_{x in X} <nu, -Ax> + sum_{a != beta} nu_a log(nu_a / c_a) + nu_beta <= c_beta.

The support-function term is replaced by its LP dual (``lambda >= 0``,
``G^T lambda = A^T nu``, cost ``<h, lambda>``), so every membership question
becomes one exponential-cone program.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .affine import CONST, AffineSignomial
from .ring import Exponent, Signomial, exponent, exponent_matrix, format_exponent
from .solver import ConicBuilder, ConicSolution, SolverOptions, Status, linprog, solve

log = logging.getLogger(__name__)

FEAS_TOL = 1e-8
VERIFY_TOL = 1e-6


class InfeasibleSetError(ValueError):
    pass


class SolverInconclusive(RuntimeError):
    def __init__(self, msg, solution: Optional[ConicSolution] = None):
        super().__init__(msg)
        self.solution = solution


class PolyhedralSet:
    """``X = {x in R^n : G x + h >= 0}``; ``m = 0`` means all of ``R^n``."""

    def __init__(self, G, h, n: Optional[int] = None, declared_compact: bool = False):
        G = np.asarray(G, dtype=float)
        h = np.asarray(h, dtype=float).reshape(-1)
        if G.size == 0:
            if n is None:
                n = G.shape[1] if G.ndim == 2 else 0
            G = np.zeros((0, n))
        else:
            G = np.atleast_2d(G)
        if n is not None and G.shape[1] != n:
            raise ValueError(f"G has {G.shape[1]} columns, expected {n}")
        if G.shape[0] != h.shape[0]:
            raise ValueError("G and h have inconsistent row counts")
        self.G = G
        self.h = h
        self.n = G.shape[1]
        self.declared_compact = declared_compact
        self._bbox = None
        self._layout = None
        self._lines = None
        if declared_compact:
            lo, hi = self.bounding_box()
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValueError("set declared compact but its bounding box is unbounded")

    @classmethod
    def whole_space(cls, n: int) -> "PolyhedralSet":
        return cls(np.zeros((0, n)), np.zeros(0), n=n)

    @classmethod
    def box(cls, lower, upper) -> "PolyhedralSet":
        """``lower <= x <= upper``; infinite entries drop the corresponding side."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = lower.size
        rows, rhs = [], []
        for i in range(n):
            if lower[i] == upper[i]:
                # equality, kept as a pair of inequalities
                pass
            if np.isfinite(upper[i]):
                r = np.zeros(n)
                r[i] = -1.0
                rows.append(r)
                rhs.append(upper[i])
            if np.isfinite(lower[i]):
                r = np.zeros(n)
                r[i] = 1.0
                rows.append(r)
                rhs.append(-lower[i])
        compact = bool(np.all(np.isfinite(lower)) and np.all(np.isfinite(upper)))
        G = np.array(rows) if rows else np.zeros((0, n))
        X = cls(G, np.array(rhs), n=n)
        X.declared_compact = compact
        X._bbox = (lower.copy(), upper.copy())
        return X

    @property
    def m(self) -> int:
        return self.G.shape[0]

    @property
    def is_unbounded(self) -> bool:
        return self.m == 0

    def __repr__(self):
        return f"PolyhedralSet(n={self.n}, m={self.m}, compact={self.declared_compact})"

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if self.m == 0:
            return True
        return bool(np.all(self.G @ x + self.h >= -tol))

    def shift(self, b) -> "PolyhedralSet":
        """The translate ``X + b``."""
        b = np.asarray(b, dtype=float)
        X = PolyhedralSet(self.G.copy(), self.h - self.G @ b, n=self.n)
        X.declared_compact = self.declared_compact
        if self._bbox is not None:
            X._bbox = (self._bbox[0] + b, self._bbox[1] + b)
        return X

    def bounding_box(self):
        """Per-coordinate bounds from ``2n`` LPs; infinite where unbounded."""
        if self._bbox is not None:
            return self._bbox[0].copy(), self._bbox[1].copy()
        n = self.n
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
        if self.m:
            for j in range(n):
                e = np.zeros(n)
                e[j] = 1.0
                for sign in (1.0, -1.0):
                    sol, x = linprog(e, A_ub=-self.G, b_ub=self.h, maximize=(sign > 0))
                    if sol.status is Status.PRIMAL_INFEASIBLE:
                        raise InfeasibleSetError("the polyhedral set is empty")
                    if x is not None:
                        if sign > 0:
                            hi[j] = x[j]
                        else:
                            lo[j] = x[j]
        self._bbox = (lo, hi)
        return lo.copy(), hi.copy()

    def lineality_basis(self) -> np.ndarray:
        """Orthonormal basis (columns) of ``null(G)``, the lines contained in ``X``."""
        if getattr(self, "_lines", None) is None:
            if self.m == 0:
                self._lines = np.eye(self.n)
            else:
                _, sv, Vt = np.linalg.svd(self.G)
                rank = int(np.sum(sv > 1e-12 * max(1.0, sv.max(initial=0.0))))
                self._lines = Vt[rank:].T.copy()
        return self._lines

    def multiplier_layout(self):
        """Pairs of opposite rows (``Gx + h = 0`` written twice) share one free multiplier.

        Returns a list of ``(row, partner)`` with ``partner = -1`` for plain rows.
        """
        if getattr(self, "_layout", None) is not None:
            return self._layout
        used = set()
        out = []
        for i in range(self.m):
            if i in used:
                continue
            partner = -1
            for j in range(i + 1, self.m):
                if j in used:
                    continue
                if np.allclose(self.G[i], -self.G[j], atol=1e-14, rtol=0) and abs(self.h[i] + self.h[j]) <= 1e-14 * (1 + abs(self.h[i])):
                    partner = j
                    break
            used.add(i)
            if partner >= 0:
                used.add(partner)
            out.append((i, partner))
        self._layout = out
        return out

    def compact(self) -> bool:
        lo, hi = self.bounding_box()
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)))

    def sample(self, k: int, rng: np.random.Generator, spread: float = 3.0, tol: float = 1e-12) -> np.ndarray:
        """Up to ``k`` points of ``X``: uniform on bounded coordinates, Gaussian elsewhere."""
        lo, hi = self.bounding_box()
        out = []
        attempts = 0
        while len(out) < k and attempts < 50:
            attempts += 1
            P = np.empty((k, self.n))
            for j in range(self.n):
                if np.isfinite(lo[j]) and np.isfinite(hi[j]):
                    P[:, j] = rng.uniform(lo[j], hi[j], size=k)
                elif np.isfinite(lo[j]):
                    P[:, j] = lo[j] + np.abs(rng.normal(0.0, spread, size=k))
                elif np.isfinite(hi[j]):
                    P[:, j] = hi[j] - np.abs(rng.normal(0.0, spread, size=k))
                else:
                    P[:, j] = rng.normal(0.0, spread, size=k)
            if self.m:
                ok = np.all(P @ self.G.T + self.h >= -tol, axis=1)
                P = P[ok]
            out.extend(P[: k - len(out)])
        return np.array(out).reshape(-1, self.n)


# ---------------------------------------------------------------------------
# support function


def support_value(X: PolyhedralSet, A, nu, noise_rtol: float = 1e-10) -> float:
    """``sup_{x in X} <nu, -A x>``; ``math.inf`` when unbounded.

    ``A`` is either a sequence of exponents or an ``(m, n)`` array.  Parts of
    ``-A^T nu`` along lines contained in ``X`` that are below ``noise_rtol``
    (relative to ``|A| |nu|``) are treated as rounding error and removed.
    """
    A = _as_matrix(A, X.n)
    nu = np.asarray(nu, dtype=float)
    q = -(A.T @ nu)
    noise = noise_rtol * max(1.0, float(np.abs(A).max(initial=0.0)) * float(np.abs(nu).sum()))
    L = X.lineality_basis()
    if L.shape[1]:
        q_line = L @ (L.T @ q)
        if float(np.abs(q_line).max()) > noise:
            return math.inf
        q = q - q_line
    if X.m == 0:
        return 0.0
    sol, x = linprog(q, A_ub=-X.G, b_ub=X.h, maximize=True)
    if sol.status is Status.PRIMAL_INFEASIBLE:
        raise InfeasibleSetError("the polyhedral set is empty")
    if sol.status is Status.DUAL_INFEASIBLE:
        return math.inf
    if x is None:
        raise SolverInconclusive("support-function LP inconclusive", sol)
    return float(q @ x)


def support_value_dual(X: PolyhedralSet, A, nu) -> float:
    """``min {<h, lam> : G^T lam = A^T nu, lam >= 0}``, the LP dual of :func:`support_value`."""
    A = _as_matrix(A, X.n)
    nu = np.asarray(nu, dtype=float)
    rhs = A.T @ nu
    if X.m == 0:
        return 0.0 if not np.any(rhs) else math.inf
    B = ConicBuilder()
    lam = B.nonneg(X.m)
    for j in range(X.n):
        B.add_row({int(lam[i]): X.G[i, j] for i in range(X.m) if X.G[i, j] != 0}, rhs[j])
    B.set_objective({int(lam[i]): X.h[i] for i in range(X.m)})
    sol = solve(B.build())
    if sol.status is Status.PRIMAL_INFEASIBLE:
        return math.inf
    if not sol.optimal:
        raise SolverInconclusive("dual support LP inconclusive", sol)
    return sol.primal_objective


def _as_matrix(A, n):
    if isinstance(A, np.ndarray) and A.dtype != object:
        return np.atleast_2d(A).astype(float)
    return exponent_matrix([exponent(a) for a in A], n)


# ---------------------------------------------------------------------------
# certificates


@dataclass
class AgeWitness:
    beta: Exponent
    nu: np.ndarray
    lp_dual: np.ndarray
    slack: float = 0.0


@dataclass
class Refutation:
    """Evidence of non-membership.

    For primal queries ``vector`` is a dual-cone point ``v`` with
    ``<c, v> < 0``; for dual queries it is an AGE coefficient vector ``c``
    (witnessed by ``witness``) with ``<c, v> < 0``.
    """

    vector: np.ndarray
    support: List[Exponent]
    witness: Optional[AgeWitness] = None
    perturbed: bool = False
    message: str = ""

    def __bool__(self):
        return False


@dataclass
class Reduction:
    """Elimination of coordinates that ``X`` pins to constants."""

    n: int
    fixed: np.ndarray
    values: np.ndarray

    @property
    def keep(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n), self.fixed)

    def exponent(self, a) -> Exponent:
        return tuple(a[i] for i in self.keep)

    def factor(self, a) -> float:
        return math.exp(sum(float(a[j]) * v for j, v in zip(self.fixed, self.values)))

    def signomial(self, f: Signomial) -> Signomial:
        acc: Dict[Exponent, float] = {}
        for a, c in f.terms.items():
            k = self.exponent(a)
            acc[k] = acc.get(k, 0.0) + c * self.factor(a)
        return Signomial(acc, len(self.keep))

    def affine(self, expr: AffineSignomial) -> AffineSignomial:
        forms: Dict[Exponent, Dict[int, float]] = {}
        for a, t in expr.forms.items():
            k = self.exponent(a)
            s = self.factor(a)
            dst = forms.setdefault(k, {})
            for var, w in t.items():
                dst[var] = dst.get(var, 0.0) + w * s
        return AffineSignomial(len(self.keep), forms)

    def polyhedron(self, X: PolyhedralSet) -> PolyhedralSet:
        keep = self.keep
        h = X.h + X.G[:, self.fixed] @ self.values
        G = X.G[:, keep]
        rows = np.any(np.abs(G) > 0, axis=1)
        if np.any(h[~rows] < -1e-9 * (1 + np.abs(h[~rows]))):
            raise InfeasibleSetError("fixed coordinates violate a constraint of X")
        Y = PolyhedralSet(G[rows], h[rows], n=len(keep))
        if X._bbox is not None:
            Y._bbox = (X._bbox[0][keep], X._bbox[1][keep])
        Y.declared_compact = X.declared_compact
        return Y

    def lift(self, x) -> np.ndarray:
        out = np.empty(self.n)
        out[self.keep] = x
        out[self.fixed] = self.values
        return out


def fixed_coordinates(X: PolyhedralSet) -> Optional[Reduction]:
    """Coordinates pinned by a pair of opposite rows ``+-(x_j - v) >= 0``, if any."""
    fixed, vals = [], []
    for i, j in X.multiplier_layout():
        if j < 0:
            continue
        nz = np.flatnonzero(X.G[i])
        if nz.size == 1 and nz[0] not in fixed:
            k = int(nz[0])
            fixed.append(k)
            vals.append(-X.h[i] / X.G[i, k])
    if not fixed or len(fixed) == X.n:
        return None
    order = np.argsort(fixed)
    return Reduction(X.n, np.array(fixed)[order], np.array(vals)[order])


@dataclass
class SageCertificate:
    """``sum_k coefficients[k]`` decomposes the certified signomial into X-AGE parts.

    ``shift`` records the frame: the certificate is valid for ``f(x - shift)``
    over ``X + shift``.  With a ``reduction`` the support lives in the
    coordinates left after substituting the ones ``X`` fixes.
    """

    support: List[Exponent]
    summands: List[tuple]  # (coefficient vector over support, AgeWitness)
    shift: Optional[np.ndarray] = None
    reduction: Optional[Reduction] = None

    def __bool__(self):
        return True

    def total(self) -> np.ndarray:
        if not self.summands:
            return np.zeros(len(self.support))
        return np.sum([c for c, _ in self.summands], axis=0)

    def summand_signomials(self, n: int) -> List[Signomial]:
        return [Signomial(dict(zip(self.support, c.tolist())), n) for c, _ in self.summands]


@dataclass
class DualSagePoint:
    v: np.ndarray
    support: List[Exponent]
    per_beta_z: Dict[Exponent, np.ndarray] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# conic encoding


@dataclass
class _AgeBlock:
    beta_index: int
    coef_idx: np.ndarray  # per support element, variable index of c^(beta)_a
    nu_idx: np.ndarray
    lam_idx: np.ndarray
    slack_idx: int
    layout: tuple = ()
    num_rows: int = 0

    def lp_dual(self, x: np.ndarray) -> np.ndarray:
        lam = np.zeros(self.num_rows)
        for (i, j), var in zip(self.layout, self.lam_idx):
            val = x[var]
            if j < 0:
                lam[i] = val
            else:
                lam[i], lam[j] = max(val, 0.0), max(-val, 0.0)
        return lam


@dataclass
class SageBlock:
    """Bookkeeping for one X-SAGE constraint placed in a :class:`ConicBuilder`."""

    support: List[Exponent]
    expr: AffineSignomial
    match_rows: np.ndarray
    blocks: List[_AgeBlock]
    n: int
    reduction: Optional[Reduction] = None
    source: Optional[AffineSignomial] = None  # expression before any reduction

    @property
    def trivial(self) -> bool:
        return not self.blocks

    def certificate(self, x: np.ndarray) -> SageCertificate:
        summands = []
        coeff_total = self.expr.evaluate(x)
        if self.trivial:
            c = np.array([coeff_total.coefficient(a) for a in self.support])
            w = AgeWitness(self.support[0], np.zeros(len(self.support)), np.zeros(0), 0.0)
            return SageCertificate(list(self.support), [(c, w)], reduction=self.reduction)
        for b in self.blocks:
            c = x[b.coef_idx]
            nu = x[b.nu_idx]
            lam = b.lp_dual(x)
            summands.append((c.copy(), AgeWitness(self.support[b.beta_index], nu.copy(), lam, float(x[b.slack_idx]))))
        return SageCertificate(list(self.support), summands, reduction=self.reduction)

    def dual_moments(self, sol: ConicSolution) -> np.ndarray:
        """Equality duals of the coefficient-matching rows (sign chosen as the moment vector)."""
        if self.trivial or sol.y is None:
            return np.zeros(len(self.support))
        return -sol.y[self.match_rows]

    def farkas_vector(self, sol: ConicSolution) -> np.ndarray:
        return sol.y[self.match_rows].copy()


def add_sage_constraint(B: ConicBuilder, expr: AffineSignomial, X: PolyhedralSet,
                        support: Optional[Sequence[Exponent]] = None,
                        force_blocks: Optional[Sequence[Exponent]] = None,
                        reduce_fixed: bool = False,
                        scale: Optional[Callable[[Exponent], float]] = None) -> SageBlock:
    """Constrain the affine signomial ``expr`` to be X-SAGE.

    One AGE block is created per exponent whose coefficient may be negative
    (nonconstant, or a negative constant); ``force_blocks`` adds more.  With
    ``reduce_fixed`` the coordinates that ``X`` pins are substituted first,
    merging exponents that agree on ``X``.

    ``scale(a)`` is the expected magnitude of the coefficient at exponent
    ``a`` (in the encoded, possibly reduced, coordinates).  The block
    variables are then solved in units of that magnitude, which matters when
    coefficients span many orders.
    """
    red = fixed_coordinates(X) if reduce_fixed else None
    source = expr
    if red is not None:
        expr = red.affine(expr)
        X = red.polyhedron(X)
        support = [red.exponent(a) for a in (support or ())]
        force_blocks = [red.exponent(a) for a in (force_blocks or ())]
    sb = _encode_sage(B, expr, X, support, force_blocks, scale)
    sb.reduction = red
    sb.source = source
    return sb


def _encode_sage(B, expr, X, support, force_blocks, scale=None) -> SageBlock:
    n = expr.n
    supp = sorted(set(expr.support()) | set(support or ()))
    index = {a: i for i, a in enumerate(supp)}
    m = len(supp)
    forms = [expr.forms.get(a, {}) for a in supp]
    negative = [i for i, t in enumerate(forms) if any(k != CONST for k in t) or t.get(CONST, 0.0) < 0]
    if force_blocks:
        negative = sorted(set(negative) | {index[exponent(a)] for a in force_blocks})

    if not negative:
        return SageBlock(supp, expr, np.zeros(0, dtype=int), [], n)

    if m == 1:
        # a single term is X-SAGE iff its coefficient is nonnegative
        t = B.nonneg(1)
        if scale is not None:
            B.set_scale(t, scale(supp[0]))
        row = _match_row(B, [int(t[0])], forms[0])
        blk = _AgeBlock(0, np.array([t[0]]), np.array([], dtype=int), np.array([], dtype=int), int(t[0]))
        sb = SageBlock(supp, expr, np.array([row]), [], n)
        sb.blocks = [blk]
        sb._single = True
        return sb

    A = exponent_matrix(supp, n)
    layout = tuple(X.multiplier_layout())
    G = X.G[[i for i, _ in layout]] if layout else X.G
    h = X.h[[i for i, _ in layout]] if layout else X.h
    paired = [j >= 0 for _, j in layout]
    p = len(layout)
    blocks = []
    coef_cols: List[List[int]] = [[] for _ in range(m)]
    for bi in negative:
        others = [i for i in range(m) if i != bi]
        trip = B.exp_cones(m - 1)
        cb = int(B.free(1)[0])
        nb = int(B.free(1)[0])
        lam = np.array([B.free(1)[0] if pr else B.nonneg(1)[0] for pr in paired], dtype=int)
        slack = int(B.nonneg(1)[0])
        coef_idx = np.empty(m, dtype=int)
        nu_idx = np.empty(m, dtype=int)
        coef_idx[bi] = cb
        nu_idx[bi] = nb
        for k, i in enumerate(others):
            nu_idx[i] = trip[k, 1]
            coef_idx[i] = trip[k, 2]
        # <1, nu> = 0
        B.add_row({int(j): 1.0 for j in nu_idx}, 0.0)
        # A^T nu - G^T lam = 0
        for j in range(n):
            terms = {}
            for i in range(m):
                if A[i, j] != 0.0:
                    terms[int(nu_idx[i])] = A[i, j]
            for r in range(p):
                if G[r, j] != 0.0:
                    terms[int(lam[r])] = terms.get(int(lam[r]), 0.0) - G[r, j]
            if terms:
                B.add_row(terms, 0.0)
        # c_beta - h'lam + sum s_a - nu_beta - slack = 0
        terms = {cb: 1.0, nb: -1.0, slack: -1.0}
        for k in range(m - 1):
            terms[int(trip[k, 0])] = 1.0
        for r in range(p):
            if h[r] != 0.0:
                terms[int(lam[r])] = terms.get(int(lam[r]), 0.0) - h[r]
        B.add_row(terms, 0.0)
        if scale is not None:
            for k, i in enumerate(others):
                B.set_scale(trip[k], scale(supp[i]))
            B.set_scale(np.concatenate([[cb, nb, slack], lam]), scale(supp[bi]))
        for i in range(m):
            coef_cols[i].append(int(coef_idx[i]))
        blocks.append(_AgeBlock(bi, coef_idx, nu_idx, lam, slack, layout, X.m))

    rows = [_match_row(B, coef_cols[i], forms[i]) for i in range(m)]
    return SageBlock(supp, expr, np.array(rows), blocks, n)


def _match_row(B: ConicBuilder, cols: List[int], form: Dict[int, float]) -> int:
    """Row ``sum(cols) - (affine form) = 0``."""
    terms: Dict[int, float] = {}
    for j in cols:
        terms[j] = terms.get(j, 0.0) + 1.0
    for k, w in form.items():
        if k != CONST:
            terms[k] = terms.get(k, 0.0) - w
    return B.add_row(terms, form.get(CONST, 0.0))


def _extract_single(sb: SageBlock, x):
    blk = sb.blocks[0]
    c = np.array([x[blk.coef_idx[0]]])
    w = AgeWitness(sb.support[0], np.zeros(1), np.zeros(0), float(c[0]))
    return SageCertificate(list(sb.support), [(c, w)], reduction=sb.reduction)


def extract_certificate(sb: SageBlock, x: np.ndarray) -> SageCertificate:
    if getattr(sb, "_single", False):
        return _extract_single(sb, x)
    return sb.certificate(x)


# ---------------------------------------------------------------------------
# membership queries


def _support_list(A) -> List[Exponent]:
    return [exponent(a) for a in A]


def age_membership(c, beta, A, X: PolyhedralSet, opts: Optional[SolverOptions] = None):
    """X-AGE test for the coefficient vector ``c`` over ``A`` with distinguished ``beta``.

    Returns an :class:`AgeWitness`, or a :class:`Refutation` whose vector is a
    dual-cone point separating ``c``.
    """
    supp = _support_list(A)
    beta = exponent(beta)
    c = np.asarray(c, dtype=float)
    bi = supp.index(beta)
    others = np.arange(len(supp)) != bi
    if np.any(c[others] < 0):
        raise ValueError("AGE test needs nonnegative coefficients away from beta")
    if c[bi] >= 0:
        return AgeWitness(beta, np.zeros(len(supp)), np.zeros(X.m), float(c[bi]))
    # a zero coefficient forces nu = 0 there, so those exponents leave the program
    keep = [i for i in range(len(supp)) if i == bi or c[i] > 0.0]
    sub = [supp[i] for i in keep]
    expr = AffineSignomial(X.n, {supp[i]: {CONST: float(c[i])} for i in keep})
    B = ConicBuilder()
    sb = add_sage_constraint(B, expr, X, support=sub, force_blocks=[beta])
    # only the beta block is needed; the builder created exactly that one
    B.set_objective({sb.blocks[0].slack_idx: -1.0})
    sol = solve(B.build(), opts)
    if sol.optimal:
        w = extract_certificate(sb, sol.x).summands[0][1]
        nu = np.zeros(len(supp))
        nu[keep] = w.nu
        return AgeWitness(beta, nu, w.lp_dual, w.slack)
    if sol.status is Status.PRIMAL_INFEASIBLE:
        v = np.zeros(len(supp))
        v[keep] = sb.farkas_vector(sol)
        return Refutation(v, supp, message="primal AGE program infeasible")
    raise SolverInconclusive(f"AGE membership inconclusive ({sol.backend_status})", sol)


def sage_membership(f: Signomial, X: PolyhedralSet, A: Optional[Sequence] = None,
                    opts: Optional[SolverOptions] = None):
    """X-SAGE test for ``f``; returns a :class:`SageCertificate` or a :class:`Refutation`."""
    if f.is_zero():
        raise ValueError("SAGE membership of the zero signomial is not defined")
    supp = sorted(set(f.support()) | set(_support_list(A or [])))
    missing = set(f.support()) - set(supp)
    if missing:
        raise ValueError("support set must contain supp(f)")
    c = np.array([f.coefficient(a) for a in supp])
    if np.all(c >= 0):
        w = AgeWitness(supp[int(np.argmin(c))], np.zeros(len(supp)), np.zeros(X.m), 0.0)
        return SageCertificate(supp, [(c, w)])
    expr = AffineSignomial.from_signomial(f)
    B = ConicBuilder()
    sb = add_sage_constraint(B, expr, X, support=supp)
    B.set_objective({})
    sol = solve(B.build(), opts)
    if sol.optimal:
        return extract_certificate(sb, sol.x)
    if sol.status is Status.PRIMAL_INFEASIBLE:
        # the sparse program only separates from the AGE cones at negative
        # exponents; blocks at every exponent give a dual-SAGE separator
        B = ConicBuilder()
        sb_full = add_sage_constraint(B, expr, X, support=supp, force_blocks=supp)
        B.set_objective({})
        full = solve(B.build(), opts)
        if full.status is Status.PRIMAL_INFEASIBLE:
            sb, sol = sb_full, full
        return Refutation(sb.farkas_vector(sol), supp, message="primal SAGE program infeasible")
    raise SolverInconclusive(f"SAGE membership inconclusive ({sol.backend_status})", sol)


def dual_age_membership(v, beta, A, X: PolyhedralSet, opts: Optional[SolverOptions] = None):
    """Membership of ``v`` in the dual X-AGE cone at ``beta``.

    Returns ``z`` (with ``z / v_beta`` in ``X``) on success, else a
    :class:`Refutation` carrying an X-AGE vector ``c`` with ``<c, v> < 0``.
    Vectors with zero entries are perturbed by ``1e-10 max(v)`` first and
    the result flagged.
    """
    supp = _support_list(A)
    beta = exponent(beta)
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("dual AGE vectors are nonnegative")
    perturbed = False
    if np.any(v <= 0):
        eps = 1e-10 * max(float(np.max(v)), 1.0)
        v = v + eps
        perturbed = True
    bi = supp.index(beta)
    vb = v[bi]
    Amat = exponent_matrix(supp, X.n)
    D = Amat - Amat[bi]
    rhs = vb * np.log(v / vb)
    rows = [i for i in range(len(supp)) if i != bi]
    # <a - beta, z> <= vb log(v_a / vb);  -G z <= h vb
    A_ub = np.vstack([D[rows], -X.G]) if X.m else D[rows]
    b_ub = np.concatenate([rhs[rows], X.h * vb]) if X.m else rhs[rows]
    sol, z = linprog(np.zeros(X.n), A_ub=A_ub, b_ub=b_ub, opts=opts)
    if z is not None:
        return z
    if sol.status is not Status.PRIMAL_INFEASIBLE:
        raise SolverInconclusive(f"dual AGE LP inconclusive ({sol.backend_status})", sol)
    # Farkas multipliers: first block rows carry mu >= 0, then lambda >= 0
    y = sol.y
    k = len(rows)
    mu = np.maximum(y[:k], 0.0)
    lam = np.maximum(y[k:], 0.0) if X.m else np.zeros(0)
    nu = np.zeros(len(supp))
    nu[rows] = mu
    nu[bi] = -mu.sum()
    cvec = np.zeros(len(supp))
    cvec[rows] = mu * vb / v[rows]
    cvec[bi] = float(X.h @ lam) + float(mu @ np.log(v[rows] / vb)) - mu.sum()
    w = AgeWitness(beta, nu, lam, 0.0)
    return Refutation(cvec, supp, witness=w, perturbed=perturbed, message="dual AGE LP infeasible")


def dual_sage_membership(v, A, X: PolyhedralSet, opts: Optional[SolverOptions] = None):
    """Membership of ``v`` in the dual X-SAGE cone (intersection over all ``beta``)."""
    supp = _support_list(A)
    point = DualSagePoint(np.asarray(v, dtype=float), supp)
    for beta in supp:
        r = dual_age_membership(v, beta, supp, X, opts)
        if isinstance(r, Refutation):
            return r
        point.per_beta_z[beta] = r
    return point


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    passed: bool
    violations: List[str]
    max_mismatch: float = 0.0
    min_sample_ratio: float = 0.0
    # summands whose AGE witness failed check (b)
    failed_summands: List[int] = field(default_factory=list)

    def __bool__(self):
        return self.passed


def _relent(u: float, v: float) -> float:
    if u <= 0.0:
        return 0.0
    # a coefficient rounded just below zero still prices the tiny u it carries
    return u * math.log(u / max(v, 1e-300))


def _projected_nu(nu, A, X: PolyhedralSet):
    """Remove numerical noise so that ``<1,nu> = 0`` and ``A^T nu`` lies in ``range(G^T)``."""
    m = len(nu)
    M = [np.ones((1, m))]
    AT = A.T
    if X.m:
        Q, _ = np.linalg.qr(X.G.T)
        P = np.eye(X.n) - Q @ Q.T
        M.append(P @ AT)
    else:
        M.append(AT)
    M = np.vstack(M)
    r = M @ nu
    corr = np.linalg.lstsq(M, r, rcond=None)[0]
    return nu - corr, float(np.linalg.norm(corr, np.inf))


def refresh_witnesses(cert: SageCertificate, X: PolyhedralSet, indices: Sequence[int],
                      opts: Optional[SolverOptions] = None) -> SageCertificate:
    """Re-derive the AGE witnesses of the listed summands from their coefficients alone.

    A witness taken from a large solve can be inaccurate where a coefficient
    sits at zero; a single-block solve per summand is far better conditioned.
    Off-beta entries that rounded below zero are clipped first, which check
    (a) of the verifier still sees.  Summands that cannot be re-witnessed keep
    their old witness.
    """
    if cert.shift is not None:
        X = X.shift(cert.shift)
    if cert.reduction is not None:
        X = cert.reduction.polyhedron(X)
    supp = list(cert.support)
    out = list(cert.summands)
    for k in sorted(set(indices)):
        c, w = out[k]
        c = np.array(c, dtype=float)
        bi = supp.index(exponent(w.beta))
        others = np.arange(len(supp)) != bi
        c[others] = np.maximum(c[others], 0.0)
        try:
            fresh = age_membership(c, w.beta, supp, X, opts)
        except (SolverInconclusive, ValueError):
            continue
        if isinstance(fresh, AgeWitness):
            out[k] = (c, fresh)
    return SageCertificate(supp, out, cert.shift, cert.reduction)


def verify_certificate(f: Signomial, cert: SageCertificate, X: PolyhedralSet, tol: float = VERIFY_TOL,
                       samples: int = 1000, seed: int = 0) -> VerificationReport:
    """Independent re-check of a SAGE certificate; never raises on bad input.

    All checks share the absolute tolerance ``tol * max(1, max |coef f|)``:
    (a) summands add up to ``f``, (b) each witness satisfies its AGE
    inequality with a freshly computed support function, (c) each summand is
    nonnegative at sampled points of ``X`` up to ``tol * scale * sum e^<a,x>``.
    """
    violations: List[str] = []
    if cert.shift is not None:
        f = f.shift(cert.shift)
        X = X.shift(cert.shift)
    if cert.reduction is not None:
        try:
            f = cert.reduction.signomial(f)
            X = cert.reduction.polyhedron(X)
        except Exception as exc:
            return VerificationReport(False, [f"reduction does not apply: {exc}"])
    supp = list(cert.support)
    n = f.n
    try:
        fc = np.array([f.coefficient(a) for a in supp])
    except Exception as exc:  # malformed exponents
        return VerificationReport(False, [f"unreadable support: {exc}"])
    scale = max(1.0, max((abs(c) for c in f.terms.values()), default=1.0))
    atol = tol * scale
    extra = set(f.support()) - set(supp)
    if extra:
        violations.append(f"(a) support misses {len(extra)} exponent(s) of f")
    total = cert.total()
    mismatch = float(np.max(np.abs(total - fc))) if fc.size else 0.0
    if extra:
        mismatch = max(mismatch, max(abs(f.coefficient(a)) for a in extra))
    if mismatch > atol:
        violations.append(f"(a) coefficient sums differ from f by {mismatch:.3e}")

    failed: List[int] = []

    def _bad(k, msg):
        violations.append(msg)
        failed.append(k)

    A = exponent_matrix(supp, n)
    for k, (c, w) in enumerate(cert.summands):
        c = np.asarray(c, dtype=float)
        beta = exponent(w.beta)
        if beta not in supp or c.shape != (len(supp),):
            _bad(k, f"(b) summand {k}: malformed (beta or coefficient length)")
            continue
        bi = supp.index(beta)
        others = np.arange(len(supp)) != bi
        if np.any(c[others] < -atol):
            _bad(k, f"(b) summand {k}: negative coefficient away from beta")
        nu = np.asarray(w.nu, dtype=float)
        if nu.shape != c.shape:
            _bad(k, f"(b) summand {k}: witness has wrong length")
            continue
        if c[bi] >= -atol:
            # nu = 0 already witnesses a (numerically) nonnegative summand
            continue
        ntol = tol * max(scale, float(np.max(np.abs(nu))))
        if abs(nu.sum()) > ntol:
            _bad(k, f"(b) summand {k}: <1, nu> = {nu.sum():.3e}")
            continue
        if np.any(nu[others] < -ntol):
            _bad(k, f"(b) summand {k}: nu negative away from beta")
            continue
        try:
            sv = support_value(X, A, nu)
            if math.isinf(sv):
                nu_p, corr = _projected_nu(nu, A, X)
                if corr > ntol:
                    _bad(k, f"(b) summand {k}: support function unbounded")
                    continue
                nu = nu_p
                sv = support_value(X, A, nu)
                if math.isinf(sv):
                    _bad(k, f"(b) summand {k}: support function unbounded")
                    continue
        except Exception as exc:
            _bad(k, f"(b) summand {k}: support LP failed ({exc})")
            continue
        ent = sum(_relent(nu[i], c[i]) for i in range(len(supp)) if i != bi)
        lhs = sv + ent + nu[bi]
        if lhs > c[bi] + max(atol, ntol):
            _bad(k, f"(b) summand {k}: AGE inequality violated by {lhs - c[bi]:.3e}")

    ratio = 0.0
    if samples:
        rng = np.random.default_rng(seed)
        try:
            pts = X.sample(samples, rng)
        except Exception as exc:
            pts = np.zeros((0, n))
            violations.append(f"(c) sampling failed ({exc})")
        if len(pts):
            basis = Signomial({a: 1.0 for a in supp}, n).eval(pts) if supp else np.ones(len(pts))
            worst = math.inf
            for k, s in enumerate(cert.summand_signomials(n)):
                if s.is_zero():
                    continue
                r = s.eval(pts) / (scale * basis)
                worst = min(worst, float(np.min(r)))
                if np.any(r < -tol):
                    violations.append(f"(c) summand {k} negative at a sampled point (ratio {float(np.min(r)):.3e})")
            ratio = worst if math.isfinite(worst) else 0.0
    return VerificationReport(not violations, violations, mismatch, ratio, failed)
