"""Standard-form conic programs over free, nonnegative and exponential-cone blocks.

A :class:`ConicProblem` reads::

    minimize    <c, x>
    subject to  A_eq x = b_eq,   x in K_1 x K_2 x ... x K_p

with each ``K_i`` one of ``FREE(k)``, ``NONNEG(k)`` or ``EXP`` (the closed
exponential cone ``{(u, v, w) : v > 0, v exp(u / v) <= w}``).  The dual is::

    maximize    <b_eq, y>
    subject to  s = c - A_eq^T y in K^*

Interior-point iterations are delegated to Clarabel.
"""
from __future__ import annotations

import enum
import io
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

FREE = "FREE"
NONNEG = "NONNEG"
EXP = "EXP"

TOL_ENV = "SIGRING_SOLVER_TOL"


class Status(str, enum.Enum):
    OPTIMAL = "OPTIMAL"
    PRIMAL_INFEASIBLE = "PRIMAL_INFEASIBLE"
    DUAL_INFEASIBLE = "DUAL_INFEASIBLE"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class SolverOptions:
    tol_feas: float = 1e-9
    tol_gap: float = 1e-9
    max_iter: int = 200
    time_limit: float = float("inf")
    verbose: bool = False
    # accept Clarabel's reduced-accuracy answers as OPTIMAL when their
    # residuals still meet ``accept_tol``
    accept_tol: float = 1e-6
    # raw backend settings applied last, e.g. {"max_step_fraction": 0.9}
    extra: Dict[str, object] = field(default_factory=dict)
    retry: bool = True

    @classmethod
    def from_env(cls, **overrides) -> "SolverOptions":
        opts = cls(**overrides)
        raw = os.environ.get(TOL_ENV)
        if raw and "tol_feas" not in overrides and "tol_gap" not in overrides:
            tol = float(raw)
            opts.tol_feas = tol
            opts.tol_gap = tol
        return opts


@dataclass
class ConicProblem:
    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    cones: List[Tuple[str, int]]
    names: Dict[str, np.ndarray] = field(default_factory=dict)
    # when set, the stored data is in coordinates x_hat with x = col_scale * x_hat
    col_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.b_eq = np.asarray(self.b_eq, dtype=float)
        self.A_eq = sp.csr_matrix(self.A_eq)
        nvar = sum(k for _, k in self.cones)
        if nvar != self.c.shape[0]:
            raise ValueError(f"cone blocks cover {nvar} variables, objective has {self.c.shape[0]}")
        if self.A_eq.shape != (self.b_eq.shape[0], nvar):
            raise ValueError(f"A_eq has shape {self.A_eq.shape}, expected ({self.b_eq.shape[0]}, {nvar})")
        for kind, k in self.cones:
            if kind == EXP and k != 3:
                raise ValueError("EXP blocks have dimension 3")
            if kind not in (FREE, NONNEG, EXP):
                raise ValueError(f"unknown cone {kind}")

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_eq(self) -> int:
        return self.b_eq.shape[0]

    def is_lp(self) -> bool:
        return all(kind != EXP for kind, _ in self.cones)

    def scaled(self, factor_c: float = 1.0, factor_b: float = 1.0) -> "ConicProblem":
        return ConicProblem(self.c * factor_c, self.A_eq.copy(), self.b_eq * factor_b, list(self.cones), dict(self.names),
                            col_scale=self.col_scale)


@dataclass
class ConicSolution:
    status: Status
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    gap: float = float("nan")
    residuals: Tuple[float, float] = (float("nan"), float("nan"))
    iterations: int = 0
    solve_time: float = 0.0
    backend_status: str = ""

    @property
    def objective(self) -> float:
        return self.primal_objective

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class ConicBuilder:
    """Incremental assembly of a :class:`ConicProblem`.

    Variables are allocated in cone blocks; equality rows are accumulated as
    sparse triplets.
    """

    def __init__(self):
        self._cones: List[Tuple[str, int]] = []
        self._nvar = 0
        self._rows: List[int] = []
        self._cols: List[int] = []
        self._vals: List[float] = []
        self._rhs: List[float] = []
        self._obj: Dict[int, float] = {}
        self._scale: Dict[int, float] = {}
        self.names: Dict[str, np.ndarray] = {}

    @property
    def num_vars(self):
        return self._nvar

    @property
    def num_rows(self):
        return len(self._rhs)

    def _alloc(self, kind, k):
        idx = np.arange(self._nvar, self._nvar + k)
        self._nvar += k
        if k:
            if self._cones and self._cones[-1][0] == kind and kind != EXP:
                self._cones[-1] = (kind, self._cones[-1][1] + k)
            else:
                self._cones.append((kind, k))
        return idx

    def free(self, k: int, name: Optional[str] = None) -> np.ndarray:
        idx = self._alloc(FREE, k)
        if name:
            self.names[name] = idx
        return idx

    def nonneg(self, k: int, name: Optional[str] = None) -> np.ndarray:
        idx = self._alloc(NONNEG, k)
        if name:
            self.names[name] = idx
        return idx

    def exp_cones(self, k: int, name: Optional[str] = None) -> np.ndarray:
        """Allocate ``k`` exponential-cone triples; returns a ``(k, 3)`` index array."""
        out = np.empty((k, 3), dtype=int)
        for i in range(k):
            out[i] = self._alloc(EXP, 3)
        if name:
            self.names[name] = out
        return out

    def add_row(self, terms: Dict[int, float], rhs: float = 0.0) -> int:
        r = len(self._rhs)
        for j, v in terms.items():
            if v != 0.0:
                self._rows.append(r)
                self._cols.append(int(j))
                self._vals.append(float(v))
        self._rhs.append(float(rhs))
        return r

    def add_rows(self, rows, cols, vals, rhs) -> np.ndarray:
        """Append a batch of rows given as triplets with local row indices."""
        base = len(self._rhs)
        rows = np.asarray(rows, dtype=int)
        self._rows.extend((rows + base).tolist())
        self._cols.extend(np.asarray(cols, dtype=int).tolist())
        self._vals.extend(np.asarray(vals, dtype=float).tolist())
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        self._rhs.extend(rhs.tolist())
        return np.arange(base, base + rhs.shape[0])

    def set_scale(self, idx, factor):
        """Solve in ``x_hat = x / factor`` for the given variables; EXP triples need a common factor."""
        idx = np.atleast_1d(np.asarray(idx, dtype=int))
        fac = np.broadcast_to(np.asarray(factor, dtype=float), idx.shape)
        if np.any(fac <= 0) or not np.all(np.isfinite(fac)):
            raise ValueError("column scales must be positive and finite")
        for j, t in zip(idx.tolist(), fac.tolist()):
            self._scale[j] = t

    def set_objective(self, terms: Dict[int, float]):
        self._obj = {int(j): float(v) for j, v in terms.items()}

    def build(self) -> ConicProblem:
        c = np.zeros(self._nvar)
        for j, v in self._obj.items():
            c[j] += v
        A = sp.coo_matrix((self._vals, (self._rows, self._cols)), shape=(len(self._rhs), self._nvar)).tocsr()
        A.sum_duplicates()
        scale = None
        if self._scale:
            scale = np.ones(self._nvar)
            for j, t in self._scale.items():
                scale[j] = t
            A = (A @ sp.diags(scale)).tocsr()
            c = c * scale
        return ConicProblem(c, A, np.array(self._rhs), list(self._cones), dict(self.names), col_scale=scale)


# ---------------------------------------------------------------------------
# presolve


@dataclass
class _Presolved:
    keep: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    certificate: Optional[np.ndarray] = None


def _presolve(p: ConicProblem) -> _Presolved:
    A = p.A_eq.tocsr()
    A.eliminate_zeros()
    b = p.b_eq
    m = A.shape[0]
    keep = []
    seen: Dict[bytes, int] = {}
    for i in range(m):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        cols, vals = A.indices[lo:hi], A.data[lo:hi]
        if cols.size == 0:
            if abs(b[i]) > 0.0:
                y = np.zeros(m)
                y[i] = -np.sign(b[i])
                return _Presolved(np.array(keep, dtype=int), A, b, certificate=y)
            continue
        order = np.argsort(cols)
        cols, vals = cols[order], vals[order]
        lead = vals[0]
        key = cols.tobytes() + np.round(vals / lead, 14).tobytes()
        j = seen.get(key)
        if j is not None:
            ratio = A[j].data[np.argsort(A[j].indices)][0] / lead
            # row i == row j / ratio up to normalization: rhs must agree
            if abs(b[j] - ratio * b[i]) <= 1e-12 * max(1.0, abs(b[j]), abs(b[i])):
                continue
            y = np.zeros(m)
            y[j] = 1.0
            y[i] = -ratio
            if b @ y > 0:
                y = -y
            return _Presolved(np.array(keep, dtype=int), A, b, certificate=y)
        seen[key] = i
        keep.append(i)
    keep = np.array(keep, dtype=int)
    return _Presolved(keep, A[keep], b[keep])


# ---------------------------------------------------------------------------
# backend


def _clarabel_status_map():
    import clarabel

    S = clarabel.SolverStatus
    return {
        S.Solved: Status.OPTIMAL,
        S.PrimalInfeasible: Status.PRIMAL_INFEASIBLE,
        S.DualInfeasible: Status.DUAL_INFEASIBLE,
    }


def _cone_rows(p: ConicProblem):
    """Selector rows ``-x_i + s = 0`` for every variable in a non-free block."""
    import clarabel

    idx = []
    cones = []
    start = 0
    for kind, k in p.cones:
        if kind == NONNEG:
            idx.extend(range(start, start + k))
            cones.append(("N", k))
        elif kind == EXP:
            idx.extend(range(start, start + 3))
            cones.append(("E", 3))
        start += k
    # merge consecutive nonnegative runs
    merged = []
    for tag, k in cones:
        if tag == "N" and merged and merged[-1][0] == "N":
            merged[-1] = ("N", merged[-1][1] + k)
        else:
            merged.append((tag, k))
    objs = [clarabel.NonnegativeConeT(k) if tag == "N" else clarabel.ExponentialConeT() for tag, k in merged]
    return np.array(idx, dtype=int), objs


# backend settings tried in order when a solve ends INCONCLUSIVE
RETRY_LADDER = ({"max_step_fraction": 0.9}, {"equilibrate_enable": False}, {"max_step_fraction": 0.7},
                {"max_step_fraction": 0.5})


def solve(p: ConicProblem, opts: Optional[SolverOptions] = None) -> ConicSolution:
    """Solve a conic problem; statuses follow the :class:`ConicSolution` contract.

    INCONCLUSIVE runs are repeated with the settings of ``RETRY_LADDER``
    (when ``opts.retry``); the first conclusive answer is returned.
    """
    opts = opts or SolverOptions.from_env()
    sol = _solve_once(p, opts)
    if sol.status is Status.INCONCLUSIVE and opts.retry:
        for k, extra in enumerate(RETRY_LADDER, 1):
            trial = _solve_once(p, replace(opts, extra={**extra, **opts.extra}))
            trial.backend_status = f"{trial.backend_status} (retry {k})"
            if trial.status is not Status.INCONCLUSIVE:
                sol = trial
                break
    return _unscale(sol, p.col_scale)


def _unscale(sol: ConicSolution, scale: Optional[np.ndarray]) -> ConicSolution:
    if scale is None:
        return sol
    if sol.x is not None:
        sol.x = sol.x * scale
    if sol.s is not None:
        sol.s = sol.s / scale
    return sol


def _inf_norm(v) -> float:
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def _solve_once(p: ConicProblem, opts: SolverOptions) -> ConicSolution:
    import clarabel

    pre = _presolve(p)
    if pre.certificate is not None:
        return ConicSolution(Status.PRIMAL_INFEASIBLE, y=pre.certificate, backend_status="presolve")

    n = p.num_vars
    m_eq = pre.A.shape[0]
    cone_idx, cone_objs = _cone_rows(p)
    k = cone_idx.size
    S = sp.csr_matrix((-np.ones(k), (np.arange(k), cone_idx)), shape=(k, n))
    A = sp.vstack([pre.A, S]).tocsc()
    b = np.concatenate([pre.b, np.zeros(k)])
    cones = ([clarabel.ZeroConeT(m_eq)] if m_eq else []) + cone_objs
    P = sp.csc_matrix((n, n))

    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.tol_feas = opts.tol_feas
    settings.tol_gap_abs = opts.tol_gap
    settings.tol_gap_rel = opts.tol_gap
    settings.tol_infeas_abs = opts.tol_feas
    settings.tol_infeas_rel = opts.tol_feas
    settings.max_iter = opts.max_iter
    settings.presolve_enable = False
    if np.isfinite(opts.time_limit):
        settings.time_limit = opts.time_limit
    for key, val in opts.extra.items():
        setattr(settings, key, val)

    if A.shape[0] == 0:
        # unconstrained free variables
        if np.any(p.c != 0):
            return ConicSolution(Status.DUAL_INFEASIBLE, x=-p.c.copy(), backend_status="trivial")
        return ConicSolution(Status.OPTIMAL, x=np.zeros(n), y=np.zeros(p.num_eq), s=np.zeros(n),
                             primal_objective=0.0, dual_objective=0.0, gap=0.0, residuals=(0.0, 0.0))

    solver = clarabel.DefaultSolver(P, p.c, A, b, cones, settings)
    res = solver.solve()
    raw = str(res.status)
    status = _clarabel_status_map().get(res.status, Status.INCONCLUSIVE)

    x = np.asarray(res.x, dtype=float)
    z = np.asarray(res.z, dtype=float)
    y_full = np.zeros(p.num_eq)
    s_full = np.zeros(n)

    if status is Status.PRIMAL_INFEASIBLE:
        # Clarabel: z in K*, A'z = 0, b'z < 0  ->  y = z_eq with A_eq'y = z_K in K*
        y_full[pre.keep] = z[:m_eq]
        scale = np.max(np.abs(y_full)) or 1.0
        y_full /= scale
        return ConicSolution(status, y=y_full, iterations=res.iterations,
                             solve_time=res.solve_time, backend_status=raw)
    if status is Status.DUAL_INFEASIBLE:
        scale = np.max(np.abs(x)) or 1.0
        return ConicSolution(status, x=x / scale, iterations=res.iterations,
                             solve_time=res.solve_time, backend_status=raw)

    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        return ConicSolution(Status.INCONCLUSIVE, iterations=res.iterations, solve_time=res.solve_time,
                             backend_status=raw + " (non-finite iterate)")
    y_full[pre.keep] = -z[:m_eq]
    s_full[cone_idx] = z[m_eq:]
    pobj = float(p.c @ x)
    dobj = float(p.b_eq @ y_full)
    rp = _inf_norm(p.A_eq @ x - p.b_eq) / (1.0 + _inf_norm(p.b_eq))
    rd_vec = p.c - p.A_eq.T @ y_full - s_full
    rd = _inf_norm(rd_vec) / (1.0 + _inf_norm(p.c))
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    sol = ConicSolution(status, x=x, y=y_full, s=s_full, primal_objective=pobj, dual_objective=dobj,
                        gap=gap, residuals=(rp, rd), iterations=res.iterations,
                        solve_time=res.solve_time, backend_status=raw)
    if status is Status.INCONCLUSIVE and raw.endswith("AlmostSolved"):
        if max(rp, rd, gap) <= opts.accept_tol:
            sol.status = Status.OPTIMAL
    if status is Status.INCONCLUSIVE:
        log.info("conic solve ended with backend status %s", raw)
    return sol


def solve_lp(p: ConicProblem, opts: Optional[SolverOptions] = None) -> ConicSolution:
    """LP path: rejects exponential-cone blocks, otherwise as :func:`solve`."""
    if not p.is_lp():
        raise ValueError("solve_lp received a problem with exponential-cone blocks")
    return solve(p, opts)


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, maximize=False,
            opts: Optional[SolverOptions] = None):
    """Solve ``min/max <c, x>`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq`` with ``x`` free.

    Returns ``(solution, x)`` where ``x`` is None unless optimal.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    B = ConicBuilder()
    xv = B.free(n)
    if A_ub is not None and len(b_ub):
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        sl = B.nonneg(A_ub.shape[0])
        for i in range(A_ub.shape[0]):
            terms = {int(xv[j]): A_ub[i, j] for j in range(n) if A_ub[i, j] != 0}
            terms[int(sl[i])] = 1.0
            B.add_row(terms, b_ub[i])
    if A_eq is not None and len(b_eq):
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        for i in range(A_eq.shape[0]):
            B.add_row({int(xv[j]): A_eq[i, j] for j in range(n) if A_eq[i, j] != 0}, b_eq[i])
    sign = -1.0 if maximize else 1.0
    B.set_objective({int(xv[j]): sign * c[j] for j in range(n)})
    sol = solve_lp(B.build(), opts)
    if sol.optimal:
        return sol, sol.x[xv]
    return sol, None


# ---------------------------------------------------------------------------
# debug dump


def dump_problem(p: ConicProblem, fh=None) -> str:
    """Write the plain-text conic format; returns the text.

    Layout::

        CONIC 1
        DIMS <num_vars> <num_eq> <nnz>
        CONES <count>
        <kind> <dim>            (one line per block)
        OBJ
        <c_j>                   (num_vars lines)
        RHS
        <b_i>                   (num_eq lines)
        AEQ
        <row> <col> <value>     (nnz lines, zero-based)
        END

    Floats carry 17 significant digits.
    """
    A = p.A_eq.tocoo()
    out = io.StringIO()
    out.write("CONIC 1\n")
    out.write(f"DIMS {p.num_vars} {p.num_eq} {A.nnz}\n")
    out.write(f"CONES {len(p.cones)}\n")
    for kind, k in p.cones:
        out.write(f"{kind} {k}\n")
    out.write("OBJ\n")
    for v in p.c:
        out.write(f"{v:.17g}\n")
    out.write("RHS\n")
    for v in p.b_eq:
        out.write(f"{v:.17g}\n")
    out.write("AEQ\n")
    for i, j, v in zip(A.row, A.col, A.data):
        out.write(f"{i} {j} {v:.17g}\n")
    out.write("END\n")
    text = out.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def load_problem(text: str) -> ConicProblem:
    lines = iter(text.splitlines())
    if next(lines).strip() != "CONIC 1":
        raise ValueError("not a CONIC 1 document")
    _, nv, ne, nnz = next(lines).split()
    nv, ne, nnz = int(nv), int(ne), int(nnz)
    _, ncones = next(lines).split()
    cones = []
    for _ in range(int(ncones)):
        kind, k = next(lines).split()
        cones.append((kind, int(k)))
    assert next(lines).strip() == "OBJ"
    c = np.array([float(next(lines)) for _ in range(nv)])
    assert next(lines).strip() == "RHS"
    b = np.array([float(next(lines)) for _ in range(ne)])
    assert next(lines).strip() == "AEQ"
    r, cidx, v = [], [], []
    for _ in range(nnz):
        i, j, val = next(lines).split()
        r.append(int(i))
        cidx.append(int(j))
        v.append(float(val))
    assert next(lines).strip() == "END"
    A = sp.coo_matrix((v, (r, cidx)), shape=(ne, nv)).tocsr()
    return ConicProblem(c, A, b, cones)
