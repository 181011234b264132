import math

import numpy as np
import pytest

from sigring.cones import (AgeWitness, DualSagePoint, InfeasibleSetError, PolyhedralSet, Refutation,
                           SageCertificate, age_membership, dual_age_membership, dual_sage_membership,
                           sage_membership, support_value, support_value_dual, verify_certificate)
from sigring.ring import Signomial

A1 = [(0,), (1,), (2,)]
R1 = PolyhedralSet.whole_space(1)


def toy_plus(c0):
    return Signomial({(2,): 1.0, (1,): -1.0, (0,): c0}, 1)


# --- support function -------------------------------------------------------

def test_support_whole_space_zero_functional():
    assert support_value(PolyhedralSet.whole_space(2), [(0, 0), (1, 1)], [0.0, 0.0]) == 0.0


def test_support_interval():
    X = PolyhedralSet.box([-1.0], [1.0])
    assert support_value(X, [(0,), (1,)], [-1.0, 1.0]) == pytest.approx(1.0, abs=1e-9)


def test_support_unbounded_line():
    assert support_value(R1, [(0,), (1,)], [-1.0, 1.0]) == math.inf


def test_support_empty_set():
    X = PolyhedralSet([[1.0], [-1.0]], [-1.0, 0.0])  # x >= 1 and x <= 0
    with pytest.raises(InfeasibleSetError):
        support_value(X, [(0,), (1,)], [-1.0, 1.0])


@pytest.mark.parametrize("seed", range(8))
def test_support_matches_dual_lp(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    X = PolyhedralSet.box(-rng.random(n) - 0.1, rng.random(n) + 0.1)
    G = np.vstack([X.G, rng.normal(size=(2, n))])
    h = np.concatenate([X.h, rng.random(2) + 0.5])
    X = PolyhedralSet(G, h)
    A = rng.integers(-2, 3, size=(4, n)).astype(float)
    nu = rng.normal(size=4)
    assert support_value(X, A, nu) == pytest.approx(support_value_dual(X, A, nu), abs=1e-8)


# --- AGE --------------------------------------------------------------------

def test_age_amgm_witness():
    w = age_membership([0.25, -1.0, 1.0], (1,), A1, R1)
    assert isinstance(w, AgeWitness)
    assert w.nu == pytest.approx([0.5, -1.0, 0.5], abs=1e-4)


def test_age_nonnegative_trivial():
    w = age_membership([1.0, 0.0, 2.0], (1,), A1, R1)
    assert isinstance(w, AgeWitness)
    assert not np.any(w.nu) and w.lp_dual.size == 0


def test_age_refuted():
    r = age_membership([0.2, -1.0, 1.0], (1,), A1, R1)
    assert isinstance(r, Refutation) and not r
    c = np.array([0.2, -1.0, 1.0])
    assert float(c @ r.vector) < 0
    assert not isinstance(dual_age_membership(np.maximum(r.vector, 0), (1,), A1, R1), Refutation)


def test_age_rejects_negative_off_beta():
    with pytest.raises(ValueError):
        age_membership([-1.0, -1.0, 1.0], (1,), A1, R1)


# --- SAGE -------------------------------------------------------------------

def test_sage_posynomial_single_trivial_summand():
    f = Signomial({(0,): 1.0, (3,): 2.0}, 1)
    cert = sage_membership(f, R1)
    assert isinstance(cert, SageCertificate) and len(cert.summands) == 1
    assert verify_certificate(f, cert, R1).passed


def test_sage_amgm_certified_and_verified():
    f = toy_plus(0.25)
    cert = sage_membership(f, R1)
    assert isinstance(cert, SageCertificate)
    rep = verify_certificate(f, cert, R1)
    assert rep.passed, rep.violations


def test_sage_conditional_halfline():
    f = Signomial({(2,): 1.0, (1,): -1.0}, 1)
    X = PolyhedralSet([[1.0]], [0.0])
    cert = sage_membership(f, X)
    assert isinstance(cert, SageCertificate)
    assert verify_certificate(f, cert, X).passed
    xs = np.linspace(0, 10, 20001)[:, None]
    assert f.eval(xs).min() >= -1e-12
    assert isinstance(sage_membership(f, R1), Refutation)


def test_verify_detects_nu_perturbation():
    f = toy_plus(0.25)
    cert = sage_membership(f, R1)
    c, w = cert.summands[0]
    nu = w.nu.copy()
    nu[0] += 1.0
    bad = SageCertificate(cert.support, [(c, AgeWitness(w.beta, nu, w.lp_dual, w.slack))])
    rep = verify_certificate(f, bad, R1)
    assert not rep.passed and any(v.startswith("(b)") for v in rep.violations)


def test_verify_detects_sum_mismatch():
    f = toy_plus(0.25)
    cert = sage_membership(f, R1)
    rep = verify_certificate(f + Signomial({(0,): 1.0}, 1), cert, R1)
    assert not rep.passed and any(v.startswith("(a)") for v in rep.violations)


def test_sage_zero_rejected():
    with pytest.raises(ValueError):
        sage_membership(Signomial({}, 1), R1)


def test_scale_covariance():
    for c0 in (0.25, 0.2):
        f = toy_plus(c0)
        a = isinstance(sage_membership(f, R1), SageCertificate)
        b = isinstance(sage_membership(f.scale(37.0), R1), SageCertificate)
        assert a == b


# --- dual AGE -----------------------------------------------------------------

def test_dual_age_evaluation_vector():
    X = PolyhedralSet.box([-1.0], [2.0])
    x0 = 0.7
    v = np.exp(np.array([0.0, 1.0, 2.0]) * x0)
    for beta in A1:
        z = dual_age_membership(v, beta, A1, X)
        assert not isinstance(z, Refutation)
        vb = v[A1.index(beta)]
        assert X.contains(z / vb, tol=1e-9)
        for a, va in zip(A1, v):
            assert (a[0] - beta[0]) * z[0] <= vb * math.log(va / vb) + 1e-9


def test_dual_age_all_ones():
    z = dual_age_membership(np.ones(3), (1,), A1, R1)
    assert not isinstance(z, Refutation) and abs(z[0]) <= 1e-8


def test_dual_age_refuted_with_separator():
    v = np.array([1.0, 3.0, 1.0])
    r = dual_age_membership(v, (1,), A1, R1)
    assert isinstance(r, Refutation)
    assert float(r.vector @ v) < 0
    # the separator is itself AGE at beta
    assert isinstance(age_membership(r.vector, (1,), A1, R1), AgeWitness)


def test_dual_age_zero_entry_perturbed():
    # needs z >= -log(eps) and z <= log(eps) after the zero entries are lifted to eps
    r = dual_age_membership(np.array([0.0, 1.0, 0.0]), (1,), A1, R1)
    assert isinstance(r, Refutation) and r.perturbed


def test_dual_sage_point_records_z():
    p = dual_sage_membership(np.exp(np.array([0.0, 1.0, 2.0]) * -0.3), A1, R1)
    assert isinstance(p, DualSagePoint) and set(p.per_beta_z) == set(A1)


# --- properties -------------------------------------------------------------

def _random_case(rng):
    n = int(rng.integers(1, 3))
    m = int(rng.integers(3, 6))
    A = [(0,) * n]
    while len(A) < m:
        a = tuple(int(v) for v in rng.integers(-2, 3, size=n))
        if a not in A:
            A.append(a)
    A = sorted(A)
    c = rng.random(m) * 2
    neg = rng.choice(m, size=int(rng.integers(1, 3)), replace=False)
    c[neg] = -rng.random(neg.size) * 2
    X = PolyhedralSet.box(-rng.random(n) - 0.5, rng.random(n) + 0.5)
    return Signomial(dict(zip(A, c.tolist())), n), A, X


@pytest.mark.parametrize("seed", range(12))
def test_primal_dual_consistency(seed):
    rng = np.random.default_rng(100 + seed)
    f, A, X = _random_case(rng)
    c = np.array([f.coefficient(a) for a in A])
    res = sage_membership(f, X, A)
    if isinstance(res, Refutation):
        v = np.maximum(res.vector, 0.0)
        v = v + 1e-12 * v.max()
        sep = dual_sage_membership(v, A, X)
        assert isinstance(sep, DualSagePoint)
        assert float(c @ v) < 0
    else:
        assert verify_certificate(f, res, X).passed
        # evaluation vectors at points of X are dual-feasible; <c, v> = f(x) >= 0
        pts = X.sample(200, np.random.default_rng(seed))
        vals = f.eval(pts)
        scale = np.abs(c).sum()
        assert vals.min() >= -1e-7 * scale * np.exp(np.abs(pts).max() * 2)


@pytest.mark.parametrize("seed", range(6))
def test_certified_is_nonnegative(seed):
    rng = np.random.default_rng(200 + seed)
    f, A, X = _random_case(rng)
    f = f + Signomial({A[0]: 3.0}, f.n)
    res = sage_membership(f, X, A)
    if isinstance(res, SageCertificate):
        pts = X.sample(10000, np.random.default_rng(seed))
        absval = f.abs_eval(pts) if hasattr(f, "abs_eval") else None
        assert np.all(f.eval(pts) >= -1e-7 * np.maximum(absval, 1.0))


def test_posynomial_absorbed_without_solve():
    rng = np.random.default_rng(5)
    for _ in range(5):
        A = sorted({(int(a),) for a in rng.integers(-3, 4, size=4)} | {(0,)})
        f = Signomial(dict(zip(A, (rng.random(len(A)) + 0.1).tolist())), 1)
        cert = sage_membership(f, R1)
        assert len(cert.summands) == 1 and not np.any(cert.summands[0][1].nu)


def test_age_witness_zero_where_coefficient_zero():
    A = [(0,), (1,), (2,), (3,)]
    w = age_membership([0.25, -1.0, 1.0, 0.0], (1,), A, R1)
    assert isinstance(w, AgeWitness) and w.nu[3] == 0.0


def test_refresh_repairs_damaged_witness():
    from sigring.cones import refresh_witnesses

    f = toy_plus(0.3)
    cert = sage_membership(f, R1)
    c, w = cert.summands[0]
    nu = w.nu.copy()
    nu[0] += 1.0
    bad = SageCertificate(cert.support, [(c, AgeWitness(w.beta, nu, w.lp_dual, w.slack))])
    rep = verify_certificate(f, bad, R1)
    assert not rep.passed and rep.failed_summands == [0]
    fixed = refresh_witnesses(bad, R1, rep.failed_summands)
    assert verify_certificate(f, fixed, R1).passed
