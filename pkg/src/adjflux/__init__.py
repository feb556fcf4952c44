"""Formal Lagrangians, adjoint systems, nonlinear self-adjointness and
conservation laws for systems of differential equations."""

from .adjoint import (AnsatzSpec, Substitution, adjoint_system, check_substitution,
                      classical_adjoint_check, find_substitution, formal_lagrangian,
                      multiplier_form)
from .conslaw import conserved_vector, strip_trivial, verify
from .dsl import load_model, parse_model
from .exprcore import Expr
from .jetcalc import Generator, JetSpace, check_symmetry, total_derivative
from .manifold import reduce, solve_for_leading
from .system import DiffSystem, Equation

__version__ = "0.1.0"

__all__ = [
    "AnsatzSpec", "DiffSystem", "Equation", "Expr", "Generator", "JetSpace", "Substitution",
    "adjoint_system", "check_substitution", "check_symmetry", "classical_adjoint_check",
    "conserved_vector", "find_substitution", "formal_lagrangian", "load_model",
    "multiplier_form", "parse_model", "reduce", "solve_for_leading", "strip_trivial",
    "total_derivative", "verify",
]
