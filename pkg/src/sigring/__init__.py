"""Signomial optimization with conditional SAGE certificates.

Lower bounds come from the A-degree graded SAGE hierarchy
(:func:`solve_lower`), upper bounds from SAGE-constrained densities against
a box reference measure (:func:`upper_bound_primal`).
"""
from .cones import (
    PolyhedralSet,
    Refutation,
    SageCertificate,
    age_membership,
    dual_age_membership,
    dual_sage_membership,
    sage_membership,
    support_value,
    verify_certificate,
)
from .lower import LowerBoundResult, ProblemInstance, recover_solutions, solve_lower
from .moments import BoxMeasure, MomentSequence, box_moment, localize
from .oracle import GridSpec, grid_minimize, identity_check
from .ring import Signomial, SignomialRing, degree, exponent, invsupp, lattice, monomial_degree
from .solver import ConicProblem, ConicSolution, SolverOptions, Status, solve
from .upper import upper_bound_dual_bisection, upper_bound_primal

__all__ = [
    "BoxMeasure", "ConicProblem", "ConicSolution", "GridSpec", "LowerBoundResult", "MomentSequence",
    "PolyhedralSet", "ProblemInstance", "Refutation", "SageCertificate", "Signomial", "SignomialRing",
    "SolverOptions", "Status", "age_membership", "box_moment", "degree", "dual_age_membership",
    "dual_sage_membership", "exponent", "grid_minimize", "identity_check", "invsupp", "lattice",
    "localize", "monomial_degree", "recover_solutions", "sage_membership", "solve", "solve_lower",
    "support_value", "upper_bound_dual_bisection", "upper_bound_primal", "verify_certificate",
]
__version__ = "0.1.0"
