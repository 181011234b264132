"""JSON problem files and certificate files.

Exponent coordinates are exact: integers, or rationals written as strings
``"p/q"``.  Coefficients are JSON numbers (strings are accepted too) and are
written back with ``repr``, which round-trips doubles bit for bit.

A problem file looks like::

    {
      "dimension": 1,
      "ring_mode": "naive",
      "objective": [{"coefficient": 1, "exponent": [2]},
                    {"coefficient": -1, "exponent": [1]}],
      "inequalities": [{"name": "g1", "tag": "box", "terms": [...]}],
      "box": {"lower": [-3], "upper": [1]}
    }

``inequalities``/``equalities`` entries are either bare term lists or
objects with ``terms`` plus optional ``name`` and ``tag``.  With
``"log_domain": false`` the box is given in ``t = exp(x)`` units (bounds
must be positive; ``0`` and ``null`` mean unbounded below) and terms are read
as monomials in ``t``, which is the same data.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cones import AgeWitness, PolyhedralSet, Reduction, SageCertificate
from .lower import ProblemInstance
from .ring import Exponent, Signomial, SignomialRing, exponent, zero_exponent

log = logging.getLogger(__name__)

RING_MODES = ("explicit", "naive", "natural")


@dataclass
class Diagnostic:
    path: str
    message: str
    line: Optional[int] = None
    column: Optional[int] = None

    def __str__(self):
        where = self.path or "<document>"
        if self.line is not None:
            where += f" (line {self.line}, column {self.column})"
        return f"{where}: {self.message}"


class ProblemFileError(ValueError):
    """Every malformed field found in one pass, as :class:`Diagnostic` entries."""

    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


@dataclass
class Constraint:
    name: str
    tag: Optional[str]
    g: Signomial


@dataclass
class ProblemFile:
    """Parsed problem document; :meth:`instance` turns it into a :class:`ProblemInstance`."""

    n: int
    ring: SignomialRing
    ring_mode: str
    objective: Signomial
    inequalities: List[Constraint] = field(default_factory=list)
    equalities: List[Constraint] = field(default_factory=list)
    G: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None
    box: Optional[Tuple[np.ndarray, np.ndarray]] = None
    name: str = ""
    warnings: List[str] = field(default_factory=list)
    # run settings stored with the problem; command-line flags override them
    config: Dict[str, Any] = field(default_factory=dict)

    def polyhedron(self) -> PolyhedralSet:
        boxset = PolyhedralSet.box(*self.box) if self.box is not None else None
        if self.G is None or not len(self.h):
            return boxset if boxset is not None else PolyhedralSet.whole_space(self.n)
        if boxset is None:
            return PolyhedralSet(self.G, self.h, n=self.n)
        X = PolyhedralSet(np.vstack([self.G, boxset.G]), np.concatenate([self.h, boxset.h]), n=self.n)
        X.declared_compact = boxset.declared_compact
        return X

    def instance(self, exclude_tags: Sequence[str] = (), fold_tags: Sequence[str] = ()) -> ProblemInstance:
        """Constraints tagged in ``exclude_tags`` are dropped; two-term ones tagged in
        ``fold_tags`` become linear rows of ``X``."""
        X = self.polyhedron()
        extra_G, extra_h = [], []
        ineqs, names = [], []
        for c in self.inequalities:
            if c.tag in exclude_tags:
                continue
            row = _as_linear(c.g) if c.tag in fold_tags else None
            if row is not None:
                extra_G.append(row[0])
                extra_h.append(row[1])
                continue
            ineqs.append(c.g)
            names.append(c.name)
        eqs = [c.g for c in self.equalities if c.tag not in exclude_tags]
        eq_names = [c.name for c in self.equalities if c.tag not in exclude_tags]
        if extra_G:
            G = np.vstack([X.G, np.array(extra_G)]) if X.m else np.array(extra_G)
            h = np.concatenate([X.h, np.array(extra_h)]) if X.m else np.array(extra_h)
            X = PolyhedralSet(G, h, n=self.n)
        return ProblemInstance(self.ring, self.objective, ineqs, eqs, X=X, ineq_names=names, eq_names=eq_names)

    def tags(self) -> List[str]:
        return sorted({c.tag for c in self.inequalities + self.equalities if c.tag})


def _as_linear(g: Signomial) -> Optional[Tuple[np.ndarray, float]]:
    """``c_a e^a - c_b e^b >= 0`` with ``c_a, c_b > 0`` is ``<a - b, x> + log(c_a / c_b) >= 0``."""
    if len(g) != 2:
        return None
    (a, ca), (b, cb) = sorted(g.terms.items(), key=lambda t: -t[1])
    if not (ca > 0 > cb):
        return None
    row = np.array([float(p) - float(q) for p, q in zip(a, b)])
    return row, math.log(ca / -cb)


# ---------------------------------------------------------------------------
# parsing


class _Collector:
    def __init__(self):
        self.diags: List[Diagnostic] = []

    def err(self, path: str, msg: str):
        self.diags.append(Diagnostic(path, msg))


def _coord(v, path, out: _Collector):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        out.err(path, f"exponent coordinate must be a number or a 'p/q' string, got {type(v).__name__}")
        return None
    if isinstance(v, float) and v != int(v):
        # only dyadic-exact floats are accepted as-is
        q = Fraction(v)
        if q.denominator > 2**20:
            out.err(path, f"non-integer float {v!r} is ambiguous; write it as a 'p/q' string")
            return None
        return q
    try:
        return exponent([v])[0]
    except (ValueError, ZeroDivisionError) as exc:
        out.err(path, f"cannot parse {v!r} as a rational ({exc})")
        return None


def _coef(v, path, out: _Collector):
    if isinstance(v, bool):
        out.err(path, "coefficient must be a number")
        return None
    if isinstance(v, (int, float)):
        if not math.isfinite(float(v)):
            out.err(path, "coefficient must be finite")
            return None
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            out.err(path, f"cannot parse coefficient {v!r}")
            return None
    out.err(path, f"coefficient must be a number, got {type(v).__name__}")
    return None


def _exp(v, n, path, out: _Collector) -> Optional[Exponent]:
    if not isinstance(v, list):
        out.err(path, "exponent must be a list")
        return None
    if len(v) != n:
        out.err(path, f"exponent has {len(v)} coordinates, dimension is {n}")
        return None
    coords = [_coord(q, f"{path}[{i}]", out) for i, q in enumerate(v)]
    if any(c is None for c in coords):
        return None
    return exponent(coords)


def _terms(v, n, path, out: _Collector) -> Optional[Signomial]:
    if not isinstance(v, list):
        out.err(path, "term list must be a list of {coefficient, exponent} objects")
        return None
    acc: Dict[Exponent, float] = {}
    ok = True
    for i, t in enumerate(v):
        tp = f"{path}[{i}]"
        if not isinstance(t, dict):
            out.err(tp, "term must be an object")
            ok = False
            continue
        for key in t:
            if key not in ("coefficient", "exponent"):
                out.err(f"{tp}.{key}", "unknown field")
                ok = False
        if "coefficient" not in t or "exponent" not in t:
            out.err(tp, "term needs 'coefficient' and 'exponent'")
            ok = False
            continue
        c = _coef(t["coefficient"], f"{tp}.coefficient", out)
        a = _exp(t["exponent"], n, f"{tp}.exponent", out)
        if c is None or a is None:
            ok = False
            continue
        acc[a] = acc.get(a, 0.0) + c
    if not ok:
        return None
    return Signomial(acc, n)


def _vector(v, length, path, out: _Collector, allow_none=False) -> Optional[np.ndarray]:
    if not isinstance(v, list) or (length is not None and len(v) != length):
        out.err(path, f"expected a list of {length} numbers")
        return None
    vals = []
    for i, q in enumerate(v):
        if q is None and allow_none:
            vals.append(math.nan)
        elif isinstance(q, (int, float)) and not isinstance(q, bool):
            vals.append(float(q))
        elif isinstance(q, str):
            try:
                vals.append(float(q))
            except ValueError:
                out.err(f"{path}[{i}]", f"cannot parse {q!r} as a number")
                return None
        else:
            out.err(f"{path}[{i}]", "expected a number")
            return None
    return np.array(vals, dtype=float)


_TOP = {"dimension", "ring", "ring_mode", "objective", "inequalities", "equalities", "X", "box",
        "log_domain", "name", "config"}


def parse_problem(text: str) -> ProblemFile:
    """Parse and validate a problem document; raises :class:`ProblemFileError`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError([Diagnostic("", exc.msg, exc.lineno, exc.colno)]) from None
    return problem_from_dict(doc, text)


def problem_from_dict(doc: Any, text: Optional[str] = None) -> ProblemFile:
    out = _Collector()
    if not isinstance(doc, dict):
        raise ProblemFileError([Diagnostic("", "top level must be an object")])
    for key in doc:
        if key not in _TOP:
            out.err(key, "unknown field")
    n = doc.get("dimension")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        out.err("dimension", "must be a positive integer")
        raise ProblemFileError(_locate(out.diags, text))
    mode = doc.get("ring_mode", "explicit" if "ring" in doc else "naive")
    if mode not in RING_MODES:
        out.err("ring_mode", f"must be one of {', '.join(RING_MODES)}")
    log_domain = doc.get("log_domain", True)
    if not isinstance(log_domain, bool):
        out.err("log_domain", "must be true or false")
        log_domain = True

    f = _terms(doc.get("objective"), n, "objective", out) if "objective" in doc else None
    if "objective" not in doc:
        out.err("objective", "missing")
    elif f is not None and f.is_zero():
        out.err("objective", "objective is the zero signomial")

    cons = {}
    for key in ("inequalities", "equalities"):
        items = doc.get(key, [])
        lst: List[Constraint] = []
        if not isinstance(items, list):
            out.err(key, "must be a list")
            items = []
        for i, item in enumerate(items):
            path = f"{key}[{i}]"
            name, tag, terms = f"{key[0]}{i + 1}", None, item
            if isinstance(item, dict):
                for k in item:
                    if k not in ("name", "tag", "terms"):
                        out.err(f"{path}.{k}", "unknown field")
                name = item.get("name", name)
                tag = item.get("tag")
                if not isinstance(name, str):
                    out.err(f"{path}.name", "must be a string")
                if tag is not None and not isinstance(tag, str):
                    out.err(f"{path}.tag", "must be a string")
                terms = item.get("terms")
                path = f"{path}.terms"
            g = _terms(terms, n, path, out)
            if g is not None:
                if g.is_zero():
                    out.err(path, "constraint is the zero signomial")
                lst.append(Constraint(name, tag, g))
        cons[key] = lst

    G = h = None
    if "X" in doc:
        Xd = doc["X"]
        if not isinstance(Xd, dict) or "G" not in Xd or "h" not in Xd:
            out.err("X", "must be an object with 'G' and 'h'")
        else:
            rows = Xd["G"]
            h = _vector(Xd["h"], None, "X.h", out)
            if not isinstance(rows, list):
                out.err("X.G", "must be a list of rows")
            elif h is not None:
                if len(rows) != len(h):
                    out.err("X.G", f"has {len(rows)} rows but h has {len(h)} entries")
                Gr = [_vector(r, n, f"X.G[{i}]", out) for i, r in enumerate(rows)]
                if all(r is not None for r in Gr) and len(rows) == len(h):
                    G = np.array(Gr, dtype=float).reshape(len(rows), n)
    box = None
    if "box" in doc:
        bd = doc["box"]
        if not isinstance(bd, dict) or "lower" not in bd or "upper" not in bd:
            out.err("box", "must be an object with 'lower' and 'upper'")
        else:
            lo = _vector(bd["lower"], n, "box.lower", out, allow_none=True)
            hi = _vector(bd["upper"], n, "box.upper", out, allow_none=True)
            if lo is not None and hi is not None:
                lo = np.where(np.isnan(lo), 0.0 if not log_domain else -np.inf, lo)
                hi = np.where(np.isnan(hi), np.inf, hi)
                if not log_domain:
                    if np.any(lo < 0) or np.any(hi <= 0):
                        out.err("box", "t-domain bounds need lower >= 0 and upper > 0")
                    else:
                        with np.errstate(divide="ignore"):
                            lo, hi = np.log(lo), np.log(hi)
                if np.any(lo > hi):
                    out.err("box", "lower exceeds upper")
                box = (lo, hi)

    ring = None
    warnings: List[str] = []
    if mode == "explicit":
        gens = doc.get("ring")
        if not isinstance(gens, list) or not gens:
            out.err("ring", "explicit ring_mode needs a nonempty list of exponents")
        else:
            exps = [_exp(a, n, f"ring[{i}]", out) for i, a in enumerate(gens)]
            if all(e is not None for e in exps):
                if zero_exponent(n) not in exps:
                    warnings.append("ring did not contain the origin; it was added")
                    log.warning("ring did not contain the origin; it was added")
                    exps.append(zero_exponent(n))
                ring = SignomialRing(exps)
    elif "ring" in doc:
        out.err("ring", f"ring_mode {mode!r} derives the ring; remove the 'ring' field")

    if not isinstance(doc.get("config", {}), dict):
        out.err("config", "must be an object")
    if out.diags:
        raise ProblemFileError(_locate(out.diags, text))
    if mode == "natural":
        ring = SignomialRing.natural(n)
    elif mode == "naive":
        sigs = [f] + [c.g for c in cons["inequalities"] + cons["equalities"]]
        ring = SignomialRing.naive(sigs)
        if zero_exponent(n) not in set().union(*(s.support() for s in sigs)):
            warnings.append("ring did not contain the origin; it was added")
            log.warning("ring did not contain the origin; it was added")
    name = doc.get("name", "")
    return ProblemFile(n, ring, mode, f, cons["inequalities"], cons["equalities"], G, h, box,
                       name=name if isinstance(name, str) else "", warnings=warnings,
                       config=dict(doc.get("config", {})))


def _locate(diags: List[Diagnostic], text: Optional[str]) -> List[Diagnostic]:
    """Best-effort line numbers: the first occurrence of the offending top-level key."""
    if not text:
        return diags
    for d in diags:
        key = d.path.split(".")[0].split("[")[0]
        if not key:
            continue
        pos = text.find(f'"{key}"')
        if pos >= 0:
            d.line = text.count("\n", 0, pos) + 1
            d.column = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return diags


def load_problem_file(path) -> ProblemFile:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


# ---------------------------------------------------------------------------
# rendering


def coord_json(q):
    if isinstance(q, Fraction):
        return f"{q.numerator}/{q.denominator}"
    return int(q)


def exponent_json(a: Exponent) -> list:
    return [coord_json(q) for q in a]


def terms_json(f: Signomial) -> list:
    return [{"coefficient": c, "exponent": exponent_json(a)} for a, c in sorted(f.terms.items())]


def _num(v: float):
    v = float(v)
    if math.isinf(v) or math.isnan(v):
        return None
    return v


def problem_to_dict(pf: ProblemFile) -> dict:
    doc: Dict[str, Any] = {"dimension": pf.n}
    if pf.name:
        doc["name"] = pf.name
    if pf.config:
        doc["config"] = dict(pf.config)
    doc["ring_mode"] = pf.ring_mode
    if pf.ring_mode == "explicit":
        doc["ring"] = [exponent_json(a) for a in pf.ring.ground_set]
    doc["objective"] = terms_json(pf.objective)
    for key, lst in (("inequalities", pf.inequalities), ("equalities", pf.equalities)):
        if lst:
            doc[key] = [_constraint_json(c) for c in lst]
    if pf.G is not None:
        doc["X"] = {"G": pf.G.tolist(), "h": pf.h.tolist()}
    if pf.box is not None:
        doc["box"] = {"lower": [_num(v) for v in pf.box[0]], "upper": [_num(v) for v in pf.box[1]]}
    return doc


def _constraint_json(c: Constraint) -> dict:
    d: Dict[str, Any] = {"name": c.name}
    if c.tag is not None:
        d["tag"] = c.tag
    d["terms"] = terms_json(c.g)
    return d


def render_problem(pf: ProblemFile) -> str:
    return json.dumps(problem_to_dict(pf), indent=2)


def problem_file_from_instance(p: ProblemInstance, name: str = "", tags: Optional[Sequence[str]] = None) -> ProblemFile:
    """Wrap an instance with an explicit ring and its ``X`` as raw rows."""
    tags = list(tags) if tags is not None else [None] * len(p.ineqs)
    ineqs = [Constraint(nm, t, g) for nm, t, g in zip(p.ineq_names, tags, p.ineqs)]
    eqs = [Constraint(nm, None, g) for nm, g in zip(p.eq_names, p.eqs)]
    G = p.X.G.copy() if p.X.m else None
    h = p.X.h.copy() if p.X.m else None
    return ProblemFile(p.n, p.ring, "explicit", p.f, ineqs, eqs, G, h, None, name=name)


# ---------------------------------------------------------------------------
# certificates


def certificate_to_dict(f: Signomial, cert: SageCertificate, X: PolyhedralSet, **meta) -> dict:
    """Self-contained record: the certified signomial, the set and the decomposition."""
    doc: Dict[str, Any] = {"kind": "sage-certificate", "dimension": f.n}
    doc.update({k: v for k, v in meta.items() if v is not None})
    doc["signomial"] = terms_json(f)
    doc["X"] = {"G": X.G.tolist(), "h": X.h.tolist()}
    doc["support"] = [exponent_json(a) for a in cert.support]
    doc["summands"] = [
        {"beta": exponent_json(w.beta), "coefficients": np.asarray(c, float).tolist(),
         "nu": np.asarray(w.nu, float).tolist(), "lp_dual": np.asarray(w.lp_dual, float).tolist(),
         "slack": float(w.slack)}
        for c, w in cert.summands
    ]
    if cert.shift is not None:
        doc["shift"] = np.asarray(cert.shift, float).tolist()
    if cert.reduction is not None:
        r = cert.reduction
        doc["reduction"] = {"fixed": r.fixed.tolist(), "values": r.values.tolist()}
    return doc


def render_certificate(f: Signomial, cert: SageCertificate, X: PolyhedralSet, **meta) -> str:
    return json.dumps(certificate_to_dict(f, cert, X, **meta), indent=2)


def parse_certificate(text: str) -> Tuple[Signomial, SageCertificate, PolyhedralSet, dict]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError([Diagnostic("", exc.msg, exc.lineno, exc.colno)]) from None
    out = _Collector()
    if not isinstance(doc, dict) or doc.get("kind") != "sage-certificate":
        raise ProblemFileError([Diagnostic("kind", "not a sage-certificate document")])
    n = doc.get("dimension")
    if not isinstance(n, int) or n < 1:
        raise ProblemFileError([Diagnostic("dimension", "must be a positive integer")])
    f = _terms(doc.get("signomial"), n, "signomial", out)
    Xd = doc.get("X", {})
    h = _vector(Xd.get("h", []), None, "X.h", out)
    rows = Xd.get("G", [])
    red = None
    if "reduction" in doc:
        rd = doc["reduction"]
        red = Reduction(n, np.array(rd["fixed"], dtype=int), np.array(rd["values"], dtype=float))
    m_supp = n - (len(red.fixed) if red is not None else 0)
    supp = [_exp(a, m_supp, f"support[{i}]", out) for i, a in enumerate(doc.get("support", []))]
    summands = []
    for i, s in enumerate(doc.get("summands", [])):
        path = f"summands[{i}]"
        try:
            beta = _exp(s["beta"], m_supp, f"{path}.beta", out)
            c = np.array(s["coefficients"], dtype=float)
            w = AgeWitness(beta, np.array(s["nu"], dtype=float), np.array(s["lp_dual"], dtype=float),
                           float(s.get("slack", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            out.err(path, f"malformed summand ({exc})")
            continue
        if len(c) != len(supp) or len(w.nu) != len(supp):
            out.err(path, "coefficient and nu vectors must match the support length")
            continue
        summands.append((c, w))
    if out.diags:
        raise ProblemFileError(out.diags)
    G = np.array(rows, dtype=float).reshape(len(h), n) if len(h) else np.zeros((0, n))
    X = PolyhedralSet(G, h, n=n)
    shift = np.array(doc["shift"], dtype=float) if "shift" in doc else None
    meta = {k: v for k, v in doc.items() if k not in ("signomial", "X", "support", "summands", "shift", "reduction")}
    return f, SageCertificate(supp, summands, shift=shift, reduction=red), X, meta


def bundled_path(name: str) -> str:
    """Filesystem path of a problem file shipped in ``sigring/data``."""
    from importlib import resources

    if not name.endswith(".json"):
        name += ".json"
    return str(resources.files("sigring") / "data" / name)
