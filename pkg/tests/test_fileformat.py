import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigring.fileformat import (ProblemFileError, bundled_path, load_problem_file, parse_certificate,
                                parse_problem, problem_file_from_instance, render_certificate,
                                render_problem)
from sigring.lower import solve_lower
from sigring.problems import five_var_data, five_var_problem
from sigring.ring import Signomial

TOY = {"dimension": 1, "ring_mode": "naive",
       "objective": [{"coefficient": 1, "exponent": [2]}, {"coefficient": -1, "exponent": [1]}]}


def test_minimal_naive_adds_origin():
    pf = parse_problem(json.dumps(TOY))
    assert set(pf.ring.ground_set) == {(0,), (1,), (2,)}
    assert any("origin" in w for w in pf.warnings)


def test_explicit_ring_missing_origin_warns():
    doc = dict(TOY, ring_mode="explicit", ring=[[1], [2]])
    pf = parse_problem(json.dumps(doc))
    assert (0,) in pf.ring.ground_set and pf.warnings


def test_five_var_natural_file():
    pf = load_problem_file(bundled_path("five_var"))
    p = pf.instance()
    assert p.n == 5 and len(p.ring) == 6
    ref = five_var_problem("natural")
    assert p.f == ref.f and len(p.ineqs) == len(ref.ineqs)
    assert all(a == b for a, b in zip(p.ineqs, ref.ineqs))
    assert np.allclose(p.X.bounding_box()[0], ref.X.bounding_box()[0], rtol=0, atol=1e-15)


def test_rational_string_exact():
    doc = dict(TOY, objective=[{"coefficient": 1, "exponent": ["1/3"]}])
    pf = parse_problem(json.dumps(doc))
    assert pf.objective.support()[0][0] == Fraction(1, 3)


def test_diagnostics_collect_every_field():
    doc = {"dimension": 2, "objective": [{"coefficient": "x", "exponent": [1]}],
           "inequalities": [[{"coefficient": 1, "exponent": [0, "a/b"]}]], "extra": 1}
    text = json.dumps(doc, indent=1)
    with pytest.raises(ProblemFileError) as ei:
        parse_problem(text)
    paths = {d.path for d in ei.value.diagnostics}
    assert {"extra", "objective[0].coefficient", "objective[0].exponent",
            "inequalities[0][0].exponent[1]"} <= paths
    assert all(d.line is not None for d in ei.value.diagnostics)


def test_syntax_error_location():
    with pytest.raises(ProblemFileError) as ei:
        parse_problem('{"dimension": 1,\n "objective": [}')
    d = ei.value.diagnostics[0]
    assert d.line == 2


def test_t_domain_box():
    doc = dict(TOY, box={"lower": [0.5], "upper": [2.0]}, log_domain=False)
    pf = parse_problem(json.dumps(doc))
    lo, hi = pf.box
    assert lo[0] == np.log(0.5) and hi[0] == np.log(2.0)


def test_fold_and_exclude_tags():
    pf = load_problem_file(bundled_path("five_var"))
    p = pf.instance(exclude_tags=["convex"], fold_tags=["box"])
    assert len(p.ineqs) == 4
    # ten folded bound rows on top of the ten box rows
    assert p.X.m == 20


def test_roundtrip_bundled_files():
    for name in ("toy", "toy_box", "five_var", "crn", "degree_example"):
        pf = load_problem_file(bundled_path(name))
        pf2 = parse_problem(render_problem(pf))
        a, b = pf.instance(), pf2.instance()
        assert a.ring.ground_set == b.ring.ground_set
        assert a.f.terms == b.f.terms
        assert all(g.terms == h.terms for g, h in zip(a.ineqs, b.ineqs))
        assert np.array_equal(a.X.G, b.X.G) and np.array_equal(a.X.h, b.X.h)


exps = st.one_of(st.integers(-5, 5), st.fractions(min_value=-3, max_value=3, max_denominator=50))
coefs = st.floats(allow_nan=False, allow_infinity=False, width=64).filter(lambda c: c != 0 and abs(c) > 1e-300)


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.tuples(exps, exps), coefs, min_size=1, max_size=6))
def test_roundtrip_bit_exact(terms):
    f = Signomial({tuple(Fraction(q) for q in a): c for a, c in terms.items()}, 2)
    if f.is_zero():
        return
    from sigring.lower import ProblemInstance
    from sigring.ring import SignomialRing

    p = ProblemInstance(SignomialRing.naive([f]), f)
    pf = problem_file_from_instance(p)
    q = parse_problem(render_problem(pf)).instance()
    assert q.f.terms == p.f.terms
    for a in q.f.terms:
        assert q.f.terms[a].hex() == p.f.terms[a].hex()
    assert q.ring.ground_set == p.ring.ground_set


def test_certificate_roundtrip_and_verify():
    from sigring.cones import verify_certificate
    from sigring.problems import toy_problem

    p = toy_problem()
    res = solve_lower(p, 1)
    f, cert, X, meta = parse_certificate(render_certificate(res.lagrangian, res.certificate, p.X, level=1))
    assert f.terms == res.lagrangian.terms and meta["level"] == 1
    assert verify_certificate(f, cert, X).passed


def test_certificate_with_reduction_roundtrip():
    from sigring.cones import verify_certificate
    from sigring.problems import crn_problem

    p = crn_problem("naive")
    res = solve_lower(p, 1)
    assert res.certificate.reduction is not None
    f, cert, X, _ = parse_certificate(render_certificate(res.lagrangian, res.certificate, p.X))
    assert verify_certificate(f, cert, X).passed
