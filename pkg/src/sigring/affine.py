"""Signomials whose coefficients are affine in conic decision variables."""
from __future__ import annotations

from typing import Dict, Iterable, Mapping, Optional

import numpy as np

from .ring import Exponent, Signomial, add_exponents

CONST = -1


class AffineSignomial:
    """Map exponent -> affine form ``{CONST: c0, var_index: weight, ...}``."""

    __slots__ = ("n", "forms")

    def __init__(self, n: int, forms: Optional[Dict[Exponent, Dict[int, float]]] = None):
        self.n = n
        self.forms: Dict[Exponent, Dict[int, float]] = forms if forms is not None else {}

    @classmethod
    def from_signomial(cls, f: Signomial) -> "AffineSignomial":
        return cls(f.n, {a: {CONST: c} for a, c in f.terms.items()})

    @classmethod
    def from_variables(cls, support: Iterable[Exponent], var_idx, n: int) -> "AffineSignomial":
        """Signomial ``sum_k z[var_idx[k]] e^{support[k]}``."""
        return cls(n, {a: {int(j): 1.0} for a, j in zip(support, var_idx)})

    def copy(self) -> "AffineSignomial":
        return AffineSignomial(self.n, {a: dict(t) for a, t in self.forms.items()})

    def support(self):
        return sorted(self.forms)

    def add_scaled_signomial(self, f: Signomial, var: int = CONST, weight: float = 1.0):
        """In place: ``self += weight * z[var] * f`` (``var=CONST`` for a constant)."""
        for a, c in f.terms.items():
            t = self.forms.setdefault(a, {})
            t[var] = t.get(var, 0.0) + weight * c
        return self

    def add_product(self, multiplier_support, var_idx, g: Signomial, weight: float = 1.0):
        """In place: ``self += weight * (sum_k z[var_idx[k]] e^{support[k]}) * g``."""
        gt = g.terms
        for b, j in zip(multiplier_support, var_idx):
            j = int(j)
            for a, c in gt.items():
                k = add_exponents(a, b)
                t = self.forms.setdefault(k, {})
                t[j] = t.get(j, 0.0) + weight * c
        return self

    def is_constant(self, a: Exponent) -> bool:
        return all(k == CONST for k in self.forms[a])

    def constant(self, a: Exponent) -> float:
        return self.forms[a].get(CONST, 0.0)

    def evaluate(self, z: np.ndarray) -> Signomial:
        """Substitute numeric variable values."""
        terms = {}
        for a, t in self.forms.items():
            v = 0.0
            for k, w in t.items():
                v += w if k == CONST else w * z[k]
            terms[a] = v
        return Signomial(terms, self.n)

    def variable_indices(self):
        out = set()
        for t in self.forms.values():
            out.update(k for k in t if k != CONST)
        return out
