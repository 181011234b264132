"""Exact signomial arithmetic and A-degree grading.

Exponents are tuples of exact rationals.  Integral coordinates are stored as
``int`` and the rest as :class:`fractions.Fraction`; the two compare and hash
identically, so mixed tuples behave as plain exact vectors.
"""
from __future__ import annotations

import math
import threading
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

Scalar = Union[int, Fraction]
Exponent = Tuple[Scalar, ...]

#: relative threshold under which coefficients are treated as cancelled
CANCEL_RTOL = 1e-12
#: default A-degree search cap
DEFAULT_MAX_DEGREE = 20


class DimensionMismatch(ValueError):
    pass


class NotInRingError(ValueError):
    """Raised when an exponent has no representation over the ground set.

    ``budget_exhausted`` is True when the search hit the degree cap without
    deciding; False when membership is refuted outright (exponent outside
    the rational span of the ground set).
    """

    def __init__(self, alpha, budget_exhausted: bool):
        self.alpha = alpha
        self.budget_exhausted = budget_exhausted
        why = "degree search budget exhausted" if budget_exhausted else "outside the span of the ground set"
        super().__init__(f"exponent {format_exponent(alpha)} not in ring ({why})")


def _scalar(q) -> Scalar:
    if isinstance(q, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(q, int):
        return q
    if isinstance(q, Fraction):
        return q.numerator if q.denominator == 1 else q
    if isinstance(q, float):
        if not math.isfinite(q):
            raise ValueError(f"non-finite exponent {q}")
        q = Fraction(q).limit_denominator(10**9) if q != int(q) else Fraction(int(q))
        return q.numerator if q.denominator == 1 else q
    if isinstance(q, str):
        f = Fraction(q.strip())
        return f.numerator if f.denominator == 1 else f
    if isinstance(q, (np.integer,)):
        return int(q)
    if isinstance(q, np.floating):
        return _scalar(float(q))
    raise TypeError(f"cannot interpret {q!r} as an exact exponent coordinate")


def exponent(coords: Iterable) -> Exponent:
    """Normalize a coordinate sequence to an exact exponent tuple.

    Strings such as ``"1/3"`` parse exactly.  Floats are converted through a
    bounded-denominator rational approximation; prefer strings when exactness
    matters.
    """
    return tuple(_scalar(q) for q in coords)


def add_exponents(a: Exponent, b: Exponent) -> Exponent:
    out = []
    for x, y in zip(a, b):
        s = x + y
        if isinstance(s, Fraction) and s.denominator == 1:
            s = s.numerator
        out.append(s)
    return tuple(out)


def neg_exponent(a: Exponent) -> Exponent:
    return tuple(-x for x in a)


def zero_exponent(n: int) -> Exponent:
    return (0,) * n


def unit_exponent(n: int, i: int) -> Exponent:
    return tuple(1 if j == i else 0 for j in range(n))


def format_exponent(a: Exponent) -> str:
    return "(" + ", ".join(str(q) for q in a) + ")"


def exponent_matrix(exps: Sequence[Exponent], n: Optional[int] = None) -> np.ndarray:
    """Float matrix whose rows are the given exponents."""
    if len(exps) == 0:
        return np.zeros((0, n or 0))
    return np.array([[float(q) for q in e] for e in exps], dtype=float)


class Signomial:
    """Immutable sparse signomial ``x -> sum_a c_a exp<a, x>``."""

    __slots__ = ("n", "_terms", "_cache")

    def __init__(self, terms: Mapping[Exponent, float], n: Optional[int] = None, *, _canonical=False):
        if _canonical:
            self._terms = dict(terms)
        else:
            acc: Dict[Exponent, float] = {}
            for a, c in terms.items():
                a = exponent(a)
                acc[a] = acc.get(a, 0.0) + float(c)
            self._terms = _prune(acc)
        if n is None:
            if not self._terms:
                raise ValueError("dimension must be given for the zero signomial")
            n = len(next(iter(self._terms)))
        for a in self._terms:
            if len(a) != n:
                raise DimensionMismatch(f"exponent {format_exponent(a)} has dimension {len(a)}, expected {n}")
        self.n = n
        self._cache = None

    # construction helpers
    @classmethod
    def constant(cls, c: float, n: int) -> "Signomial":
        return cls({zero_exponent(n): c}, n)

    @classmethod
    def monomial(cls, alpha, c: float = 1.0) -> "Signomial":
        alpha = exponent(alpha)
        return cls({alpha: c}, len(alpha))

    @classmethod
    def zero(cls, n: int) -> "Signomial":
        return cls({}, n, _canonical=True)

    @classmethod
    def from_arrays(cls, alpha, c) -> "Signomial":
        alpha = np.atleast_2d(alpha) if not isinstance(alpha, (list, tuple)) else alpha
        rows = [exponent(r) for r in alpha]
        n = len(rows[0]) if rows else 0
        acc: Dict[Exponent, float] = {}
        for r, ci in zip(rows, c):
            acc[r] = acc.get(r, 0.0) + float(ci)
        return cls(acc, n)

    # views
    @property
    def terms(self) -> Dict[Exponent, float]:
        return dict(self._terms)

    def support(self):
        return sorted(self._terms)

    def coefficient(self, alpha) -> float:
        return self._terms.get(exponent(alpha), 0.0)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(sorted(self._terms.items()))

    def is_zero(self) -> bool:
        return not self._terms

    def is_posynomial(self) -> bool:
        return all(c > 0 for c in self._terms.values())

    def negative_support(self):
        return sorted(a for a, c in self._terms.items() if c < 0)

    def _arrays(self):
        if self._cache is None:
            exps = self.support()
            self._cache = (exps, exponent_matrix(exps, self.n), np.array([self._terms[a] for a in exps]))
        return self._cache

    def arrays(self):
        """Return ``(exponents, exponent matrix, coefficient vector)`` in sorted order."""
        exps, A, c = self._arrays()
        return list(exps), A.copy(), c.copy()

    # evaluation
    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Evaluate at a point (1-D) or at each row of a 2-D array of points."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionMismatch(f"point has dimension {x.shape[-1]}, signomial has {self.n}")
        _, A, c = self._arrays()
        if x.ndim == 1:
            if not len(c):
                return 0.0
            vals = c * np.exp(A @ x)
            return math.fsum(vals.tolist())
        if not len(c):
            return np.zeros(x.shape[0])
        E = np.exp(x @ A.T).astype(np.longdouble)
        return np.asarray(E @ c.astype(np.longdouble), dtype=float)

    def abs_eval(self, x):
        """Evaluate ``sum |c_a| exp<a, x>``, the natural scale of ``eval``."""
        x = np.asarray(x, dtype=float)
        _, A, c = self._arrays()
        if not len(c):
            return 0.0 if x.ndim == 1 else np.zeros(x.shape[0])
        if x.ndim == 1:
            return float(np.abs(c) @ np.exp(A @ x))
        return np.exp(x @ A.T) @ np.abs(c)

    # arithmetic
    def _check(self, other: "Signomial"):
        if other.n != self.n:
            raise DimensionMismatch(f"dimensions {self.n} and {other.n} differ")

    def _coerce(self, other) -> "Signomial":
        if isinstance(other, Signomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Signomial.constant(float(other), self.n)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc = dict(self._terms)
        for a, c in other._terms.items():
            acc[a] = acc.get(a, 0.0) + c
        scale = max(_maxabs(self._terms), _maxabs(other._terms))
        return Signomial(_prune(acc, scale), self.n, _canonical=True)

    __radd__ = __add__

    def __neg__(self):
        return Signomial({a: -c for a, c in self._terms.items()}, self.n, _canonical=True)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s: float) -> "Signomial":
        s = float(s)
        if s == 0.0:
            return Signomial.zero(self.n)
        return Signomial({a: s * c for a, c in self._terms.items()}, self.n, _canonical=True)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(other)
        if not isinstance(other, Signomial):
            return NotImplemented
        self._check(other)
        acc: Dict[Exponent, float] = {}
        for a, ca in self._terms.items():
            for b, cb in other._terms.items():
                k = add_exponents(a, b)
                acc[k] = acc.get(k, 0.0) + ca * cb
        scale = _maxabs(self._terms) * _maxabs(other._terms)
        return Signomial(_prune(acc, scale), self.n, _canonical=True)

    __rmul__ = __mul__

    def __truediv__(self, s):
        if isinstance(s, (int, float, np.floating, np.integer)):
            return self.scale(1.0 / float(s))
        return NotImplemented

    def __pow__(self, r: int):
        if not isinstance(r, (int, np.integer)) or r < 0:
            raise ValueError("only natural powers are supported")
        result = Signomial.constant(1.0, self.n)
        base = self
        r = int(r)
        while r:
            if r & 1:
                result = result * base
            r >>= 1
            if r:
                base = base * base
        return result

    def shift(self, b) -> "Signomial":
        """Return ``x -> f(x - b)``; the support is unchanged."""
        b = np.asarray(b, dtype=float)
        if b.shape != (self.n,):
            raise DimensionMismatch(f"shift vector has shape {b.shape}, expected ({self.n},)")
        exps, A, c = self._arrays()
        scaled = c * np.exp(-(A @ b))
        return Signomial(dict(zip(exps, scaled.tolist())), self.n, _canonical=True)

    def __eq__(self, other):
        if not isinstance(other, Signomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, frozenset(self._terms.items())))

    def __repr__(self):
        if not self._terms:
            return f"Signomial(0, n={self.n})"
        parts = [f"{c:+.6g}*e^{format_exponent(a)}" for a, c in self]
        return "Signomial(" + " ".join(parts) + ")"


def _maxabs(terms: Mapping) -> float:
    return max((abs(c) for c in terms.values()), default=0.0)


def _prune(acc: Dict[Exponent, float], scale: Optional[float] = None) -> Dict[Exponent, float]:
    if scale is None:
        scale = _maxabs(acc)
    cut = CANCEL_RTOL * scale
    return {a: c for a, c in acc.items() if c != 0.0 and abs(c) >= cut}


def eval_signomial(f: Signomial, x) -> float:
    return f.eval(x)


def shift(f: Signomial, b) -> Signomial:
    return f.shift(b)


def is_posynomial(f: Signomial) -> bool:
    return f.is_posynomial()


class SignomialRing:
    """Ground set ``A`` (containing the origin) with memoized A-degree data."""

    def __init__(self, ground_set: Iterable, max_degree: int = DEFAULT_MAX_DEGREE):
        exps = []
        seen = set()
        for a in ground_set:
            a = exponent(a)
            if a not in seen:
                seen.add(a)
                exps.append(a)
        if not exps:
            raise ValueError("ground set must be nonempty")
        n = len(exps[0])
        if any(len(a) != n for a in exps):
            raise DimensionMismatch("ground set exponents have differing dimensions")
        if zero_exponent(n) not in seen:
            raise ValueError("ground set must contain the origin")
        self.n = n
        self.ground_set = tuple(sorted(exps))
        self.max_degree = max_degree
        self._nonzero = tuple(a for a in self.ground_set if any(a))
        self._degree_memo: Dict[Exponent, int] = {zero_exponent(n): 1}
        for a in self._nonzero:
            self._degree_memo[a] = 1
        self._lattice_memo: Dict[int, frozenset] = {1: frozenset(self.ground_set)}
        self._lock = threading.RLock()
        # integer image of the ground set for the degree search
        den = 1
        for a in self.ground_set:
            for q in a:
                if isinstance(q, Fraction):
                    den = den * q.denominator // math.gcd(den, q.denominator)
        self._den = den
        self._int_gens = [tuple(int(q * den) for q in a) for a in self._nonzero]

    @classmethod
    def natural(cls, n: int, **kw) -> "SignomialRing":
        return cls([zero_exponent(n)] + [unit_exponent(n, i) for i in range(n)], **kw)

    @classmethod
    def naive(cls, signomials: Iterable[Signomial], **kw) -> "SignomialRing":
        sigs = list(signomials)
        n = sigs[0].n
        exps = {zero_exponent(n)}
        for s in sigs:
            exps.update(s.support())
        return cls(exps, **kw)

    def __len__(self):
        return len(self.ground_set)

    def __contains__(self, f) -> bool:
        try:
            self.degree(f)
        except NotInRingError:
            return False
        return True

    def __repr__(self):
        return f"SignomialRing(n={self.n}, |A|={len(self.ground_set)})"

    def exponent_matrix(self) -> np.ndarray:
        return exponent_matrix(self.ground_set, self.n)

    def is_injective(self) -> bool:
        """True when the exponents span R^n (the linear map x -> Ax is injective)."""
        return np.linalg.matrix_rank(self.exponent_matrix()) == self.n

    # A-degree
    def monomial_degree(self, alpha) -> int:
        alpha = exponent(alpha)
        if len(alpha) != self.n:
            raise DimensionMismatch(f"exponent dimension {len(alpha)} != ring dimension {self.n}")
        with self._lock:
            hit = self._degree_memo.get(alpha)
            if hit is not None:
                return hit
        target = []
        for q in alpha:
            s = q * self._den
            if isinstance(s, Fraction) and s.denominator != 1:
                raise NotInRingError(alpha, budget_exhausted=False)
            target.append(int(s))
        target = tuple(target)
        if not _in_rational_span(self._int_gens, target):
            raise NotInRingError(alpha, budget_exhausted=False)
        for level in range(2, self.max_degree + 1):
            if _reachable(self._int_gens, target, level):
                with self._lock:
                    self._degree_memo[alpha] = level
                return level
        raise NotInRingError(alpha, budget_exhausted=True)

    def degree(self, f: Signomial) -> int:
        if f.n != self.n:
            raise DimensionMismatch(f"signomial dimension {f.n} != ring dimension {self.n}")
        if f.is_zero():
            raise ValueError("the zero signomial has no A-degree")
        return max(self.monomial_degree(a) for a in f.support())

    def lattice(self, d: int) -> frozenset:
        """The set ``A_d`` of sums of at most ``d`` ground-set vectors."""
        if d < 1:
            raise ValueError("lattice level must be at least 1")
        with self._lock:
            top = max(k for k in self._lattice_memo if k <= d)
            cur = self._lattice_memo[top]
            while top < d:
                nxt = set(cur)
                for a in cur:
                    for g in self._nonzero:
                        nxt.add(add_exponents(a, g))
                top += 1
                cur = frozenset(nxt)
                self._lattice_memo[top] = cur
            return cur

    def sorted_lattice(self, d: int):
        return sorted(self.lattice(d))

    def invsupp(self, f: Signomial, d: int):
        """Exponents ``a`` in ``A_d`` whose shift of ``supp(f)`` stays inside ``A_d``."""
        if f.is_zero():
            raise ValueError("invsupp is undefined for the zero signomial")
        Ad = self.lattice(d)
        supp = f.support()
        return sorted(a for a in Ad if all(add_exponents(a, b) in Ad for b in supp))

    def total(self) -> Signomial:
        """The signomial ``sum_{a in A} e^a``."""
        return Signomial({a: 1.0 for a in self.ground_set}, self.n, _canonical=True)


def monomial_degree(ring: SignomialRing, alpha) -> int:
    return ring.monomial_degree(alpha)


def degree(ring: SignomialRing, f: Signomial) -> int:
    return ring.degree(f)


def lattice(ring: SignomialRing, d: int) -> frozenset:
    return ring.lattice(d)


def invsupp(ring: SignomialRing, f: Signomial, d: int):
    return ring.invsupp(f, d)


def _in_rational_span(gens, target) -> bool:
    if not any(target):
        return True
    if not gens:
        return False
    M = [[Fraction(v) for v in g] for g in gens]
    rank_without = _rank(M)
    rank_with = _rank(M + [[Fraction(v) for v in target]])
    return rank_with == rank_without


def _rank(rows) -> int:
    rows = [list(r) for r in rows]
    rank = 0
    ncol = len(rows[0]) if rows else 0
    for col in range(ncol):
        piv = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        p = rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                factor = rows[i][col] / p[col]
                rows[i] = [x - factor * y for x, y in zip(rows[i], p)]
        rank += 1
    return rank


def _reachable(gens, target, level: int) -> bool:
    """Is ``target`` a sum of at most ``level`` generators (with repetition)?

    Depth-first over nondecreasing generator indices; a branch is cut when the
    target leaves the box reachable with the remaining summands.
    """
    n = len(target)
    lo = [min(0, min((g[i] for g in gens), default=0)) for i in range(n)]
    hi = [max(0, max((g[i] for g in gens), default=0)) for i in range(n)]

    def feasible(rem, k):
        return all(lo[i] * k <= rem[i] <= hi[i] * k for i in range(n))

    def dfs(rem, k, start):
        if not any(rem):
            return True
        if k == 0 or not feasible(rem, k):
            return False
        for j in range(start, len(gens)):
            g = gens[j]
            nxt = tuple(r - x for r, x in zip(rem, g))
            if dfs(nxt, k - 1, j):
                return True
        return False

    return dfs(target, level, 0)
