"""Independent estimate of the toy upper-bound gap.

Minimizes ``int f psi dmu / int psi dmu`` over densities ``psi`` spanned by
``e^{kx}``, ``k = 0..2d`` (the exponents available at level ``d`` for the
ring ``{0, 1, 2}``), subject to ``psi >= 0`` on a fine grid of the box.  Any
SAGE-complete density is nonnegative on the box, so this value sits below
the moment-hierarchy bound at the same level.  Moments come from adaptive
quadrature; the LP is solved by HiGHS through scipy.

Run: ``python tests/oracles/density_grid.py`` (prints one line per level).
"""
from __future__ import annotations

import json
import sys

import numpy as np
from scipy import integrate, optimize

LO, HI = -3.0, 1.0
FMIN = -0.25


def moment(k: float) -> float:
    val, _ = integrate.quad(lambda x: np.exp(k * x), LO, HI, epsabs=1e-13, epsrel=1e-13)
    return val / (HI - LO)


def nonneg_density_bound(d: int, grid: int = 4001) -> float:
    ks = np.arange(0, 2 * d + 1, dtype=float)
    mass = np.array([moment(k) for k in ks])
    # f = e^{2x} - e^{x}
    cost = np.array([moment(k + 2) - moment(k + 1) for k in ks])
    xs = np.linspace(LO, HI, grid)
    V = np.exp(np.outer(xs, ks))
    scale = V.max(axis=1, keepdims=True)
    res = optimize.linprog(cost, A_ub=-(V / scale), b_ub=np.zeros(grid), A_eq=mass[None, :], b_eq=[1.0],
                           bounds=[(None, None)] * len(ks), method="highs")
    if res.status != 0:
        raise RuntimeError(res.message)
    return float(res.fun)


def main(argv=None) -> int:
    out = {}
    for d in range(1, 5):
        val = nonneg_density_bound(d)
        out[d] = val
        print(f"d={d} nonneg-density value {val:.8f} gap {val - FMIN:.8f}")
    if argv and "--json" in argv:
        print(json.dumps(out))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
