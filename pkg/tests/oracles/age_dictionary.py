"""Independent estimate of the best SAGE-density upper bound on the toy problem.

Builds a large dictionary of functions that are AGE on the box [-3, 1]:
single exponentials, three-term AM/GM forms tight at many points, and
two-term forms tight at a box end.  An LP over nonnegative mixtures with
unit mass gives a value that a full X-SAGE solve can only improve on.
The value does not move as the exponent range grows, which shows that
plain SAGE densities stall near -0.1145 for ``f = e^{2x} - e^x``.

Run: ``python tests/oracles/age_dictionary.py``.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy import integrate, optimize

LO, HI = -3.0, 1.0


def moment(k: float) -> float:
    val, _ = integrate.quad(lambda x: np.exp(k * x), LO, HI, epsabs=1e-14, epsrel=1e-13)
    return val / (HI - LO)


def dictionary(top: int) -> np.ndarray:
    ks = range(top + 1)
    rows = [np.eye(top + 1)[k] for k in ks]
    for a, b, c in itertools.combinations(ks, 3):
        lam = (c - b) / (c - a)
        for x0 in np.linspace(LO - 2, HI + 2, 161):
            v = np.zeros(top + 1)
            v[a] = lam * np.exp((b - a) * x0)
            v[c] = (1 - lam) * np.exp((b - c) * x0)
            v[b] = -1.0
            rows.append(v)
    for a, b in itertools.permutations(ks, 2):
        v = np.zeros(top + 1)
        v[a] = 1.0
        v[b] = -np.exp((a - b) * (HI if b > a else LO))
        rows.append(v)
    return np.array(rows)


def best_mixture(top: int) -> float:
    M = dictionary(top)
    ks = np.arange(top + 1)
    xs = np.linspace(LO, HI, 2001)
    vals = np.exp(np.outer(xs, ks)) @ M.T
    assert vals.min() >= -1e-9 * np.abs(vals).max()
    mass = np.array([moment(k) for k in ks])
    cost = np.array([moment(k + 2) - moment(k + 1) for k in ks])
    res = optimize.linprog(M @ cost, A_eq=(M @ mass)[None, :], b_eq=[1.0],
                           bounds=[(0, None)] * len(M), method="highs")
    return float(res.fun)


if __name__ == "__main__":
    for top in (2, 4, 6):
        print(f"exponents 0..{top}: {best_mixture(top):.10f}")
