"""Moments of exponentials under the uniform probability measure on a box."""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .ring import Exponent, Signomial, SignomialRing, add_exponents, exponent

OVERFLOW_CAP = 700.0


class MomentOverflow(OverflowError):
    pass


def _log_expm1_ratio(t: float) -> float:
    """``log((e^t - 1) / t)``, continuous at ``t = 0``."""
    if t == 0.0:
        return 0.0
    if t > 30.0:
        return t + math.log1p(-math.exp(-t)) - math.log(t)
    if t < -30.0:
        return math.log1p(-math.exp(t)) - math.log(-t)
    return math.log(math.expm1(t) / t)


def log_phi(a: float, lo: float, hi: float) -> float:
    """Log of the mean of ``e^{a x}`` over ``[lo, hi]``."""
    return a * lo + _log_expm1_ratio(a * (hi - lo))


def phi(a: float, lo: float, hi: float, cap: float = OVERFLOW_CAP) -> float:
    if a * hi > cap or a * lo > cap:
        raise MomentOverflow(f"e^({a}*{hi}) exceeds the overflow cap")
    t = a * (hi - lo)
    if t == 0.0:
        return 1.0
    return math.exp(a * lo) * math.expm1(t) / t


@dataclass(frozen=True)
class BoxMeasure:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError("box bounds differ in length")
        if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in zip(lo, hi)):
            raise ValueError("box needs finite bounds with lower < upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return len(self.lower)

    def shift(self, b) -> "BoxMeasure":
        b = [float(v) for v in b]
        return BoxMeasure(tuple(l + s for l, s in zip(self.lower, b)), tuple(u + s for u, s in zip(self.upper, b)))

    def midpoint(self) -> np.ndarray:
        return (np.array(self.lower) + np.array(self.upper)) / 2.0


def box_moment(m: BoxMeasure, alpha, cap: float = OVERFLOW_CAP) -> float:
    """``int e^{<alpha, x>} dmu`` for the uniform probability measure on the box."""
    alpha = exponent(alpha)
    if len(alpha) != m.n:
        raise ValueError("exponent and box dimensions differ")
    out = 1.0
    for a, lo, hi in zip(alpha, m.lower, m.upper):
        out *= phi(float(a), lo, hi, cap)
    if not math.isfinite(out):
        raise MomentOverflow("moment overflowed double precision")
    return out


def log_box_moment(m: BoxMeasure, alpha) -> float:
    alpha = exponent(alpha)
    return sum(log_phi(float(a), lo, hi) for a, lo, hi in zip(alpha, m.lower, m.upper))


class MomentSequence:
    """Lazily evaluated moments ``y_alpha`` with a thread-safe cache."""

    def __init__(self, measure: BoxMeasure, cap: float = OVERFLOW_CAP):
        self.measure = measure
        self.cap = cap
        self._cache: Dict[Exponent, float] = {}
        self._log_cache: Dict[Exponent, float] = {}
        self._lock = threading.Lock()

    def __getitem__(self, alpha) -> float:
        alpha = exponent(alpha)
        with self._lock:
            hit = self._cache.get(alpha)
        if hit is None:
            hit = box_moment(self.measure, alpha, self.cap)
            with self._lock:
                self._cache[alpha] = hit
        return hit

    def log(self, alpha) -> float:
        alpha = exponent(alpha)
        with self._lock:
            hit = self._log_cache.get(alpha)
        if hit is None:
            hit = log_box_moment(self.measure, alpha)
            with self._lock:
                self._log_cache[alpha] = hit
        return hit

    def riesz(self, f: Signomial) -> float:
        """``L_y(f) = sum_a c_a y_a``."""
        return math.fsum(c * self[a] for a, c in f.terms.items())


@dataclass
class Localizer:
    """Entries ``L_y(f e^alpha)`` for ``alpha`` in ``support``, times ``exp(log_scale)``."""

    support: list
    values: np.ndarray
    log_scale: float = 0.0

    def dense(self) -> np.ndarray:
        return self.values * math.exp(self.log_scale)


def localize(y: MomentSequence, ring: SignomialRing, f: Signomial, d: int,
             support: Optional[Sequence[Exponent]] = None) -> Localizer:
    """Localizer of ``f`` over ``A_d`` (or an explicit ``support``).

    A shared scale factor is split off when the raw moments would exceed
    ``1e300``.
    """
    supp = list(support) if support is not None else ring.sorted_lattice(d)
    terms = list(f.terms.items())
    logs = [[y.log(add_exponents(a, b)) for b, _ in terms] for a in supp]
    peak = max((max(row) for row in logs if row), default=0.0)
    shift = peak if peak > math.log(1e300) else 0.0
    vals = np.empty(len(supp))
    for i, (a, row) in enumerate(zip(supp, logs)):
        if shift:
            vals[i] = math.fsum(c * math.exp(l - shift) for (_, c), l in zip(terms, row))
        else:
            vals[i] = math.fsum(c * y[add_exponents(a, b)] for b, c in terms)
    return Localizer(supp, vals, shift)
