"""Jet-space bookkeeping, total and variational derivatives, prolongation."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

from .exprcore import (ADJ, DEP, FUNC, INDEP, PARAM, ZERO, Atom, Expr, derive,
                       func, indep, jet, partial, to_text)

DEFAULT_MAX_ORDER = 10


class JetError(ValueError):
    pass


class JetOrderError(JetError):
    pass


# -- multi-indices ---------------------------------------------------------------
# A multi-index is a sorted tuple of independent-variable names.

def mi(*names: str) -> tuple:
    return tuple(sorted(names))


def mi_add(a: tuple, b: tuple) -> tuple:
    return tuple(sorted(a + b))


def mi_sub(a: tuple, b: tuple) -> tuple | None:
    """``a - b`` as multisets, or None when ``b`` is not contained in ``a``."""
    ca, cb = Counter(a), Counter(b)
    if any(ca[k] < n for k, n in cb.items()):
        return None
    return tuple(sorted((ca - cb).elements()))


def mi_permutations(a: tuple) -> int:
    """Number of distinct orderings of the multi-index."""
    n = math.factorial(len(a))
    for c in Counter(a).values():
        n //= math.factorial(c)
    return n


def sub_multi_indices(a: tuple):
    """All sub-multisets J of ``a``; yields (J, a - J)."""
    counts = sorted(Counter(a).items())
    ranges = [range(n + 1) for _, n in counts]
    for pick in itertools.product(*ranges):
        j = tuple(sorted(itertools.chain.from_iterable(
            [name] * k for (name, _), k in zip(counts, pick))))
        yield j, mi_sub(a, j)


def multi_indices(names, order: int):
    for s in range(order + 1):
        yield from itertools.combinations_with_replacement(sorted(names), s)


@dataclass
class JetSpace:
    """Independent variables, the u-block, its adjoint v-block and the
    arbitrary functions of the independents."""

    independents: tuple
    dependents: tuple
    adjoints: tuple = ()
    functions: dict = field(default_factory=dict)
    max_order: int = DEFAULT_MAX_ORDER

    def __post_init__(self):
        self.independents = tuple(self.independents)
        self.dependents = tuple(self.dependents)
        if not self.adjoints:
            self.adjoints = default_adjoint_names(self.dependents, self.independents,
                                                  tuple(self.functions))
        self.adjoints = tuple(self.adjoints)
        if len(self.adjoints) != len(self.dependents):
            raise JetError("need exactly one adjoint variable per dependent variable")
        names = list(self.independents) + list(self.dependents) + list(self.adjoints) \
            + list(self.functions)
        dup = [n for n, c in Counter(names).items() if c > 1]
        if dup:
            raise JetError(f"duplicate names: {', '.join(dup)}")
        for f, args in self.functions.items():
            bad = [a for a in args if a not in self.independents]
            if bad:
                raise JetError(f"function {f} depends on undeclared variables {bad}")

    # atom constructors
    def x(self, name: str) -> Expr:
        self.check_independent(name)
        return Expr.atom(indep(name))

    def u(self, name: str, *deriv: str) -> Expr:
        if name not in self.dependents:
            raise JetError(f"{name} is not a dependent variable")
        return Expr.atom(jet(name, *deriv))

    def v(self, name: str, *deriv: str) -> Expr:
        if name not in self.adjoints:
            raise JetError(f"{name} is not an adjoint variable")
        return Expr.atom(jet(name, *deriv, adjoint=True))

    def f(self, name: str, *deriv: str) -> Expr:
        return Expr.atom(func(name, self.functions[name], *deriv))

    def adjoint_of(self, dep: str) -> str:
        return self.adjoints[self.dependents.index(dep)]

    def dependent_of(self, adj: str) -> str:
        return self.dependents[self.adjoints.index(adj)]

    def check_independent(self, name: str) -> None:
        if name not in self.independents:
            raise JetError(f"{name} is not an independent variable")

    def dependent_kind(self, name: str) -> int:
        if name in self.dependents:
            return DEP
        if name in self.adjoints:
            return ADJ
        raise JetError(f"{name} is not a dependent variable")

    def swapped(self) -> "JetSpace":
        """The same space with the u- and v-blocks exchanged."""
        return JetSpace(self.independents, self.adjoints, self.dependents,
                        dict(self.functions), self.max_order)


def default_adjoint_names(dependents, independents=(), taken=()) -> tuple:
    used = set(dependents) | set(independents) | set(taken)
    if len(dependents) == 1 and "v" not in used:
        return ("v",)
    out = []
    for k, _ in enumerate(dependents, 1):
        name = f"v{k}"
        while name in used:
            name += "_"
        out.append(name)
    return tuple(out)


def swap_atoms(e: Expr) -> Expr:
    """Exchange DEP and ADJ atom kinds (pairs with :meth:`JetSpace.swapped`)."""
    from .exprcore import subs

    mapping = {}
    for a in e.atoms():
        if a.kind == DEP:
            mapping[a] = Expr.atom(a._replace(kind=ADJ))
        elif a.kind == ADJ:
            mapping[a] = Expr.atom(a._replace(kind=DEP))
    return subs(e, mapping)


def swap_names(e: Expr, space: JetSpace) -> Expr:
    """Rename u-block atoms to their adjoint names and vice versa."""
    from .exprcore import subs

    mapping = {}
    for a in e.atoms():
        if a.kind == DEP:
            mapping[a] = Expr.atom(a._replace(kind=ADJ, name=space.adjoint_of(a.name)))
        elif a.kind == ADJ:
            mapping[a] = Expr.atom(a._replace(kind=DEP, name=space.dependent_of(a.name)))
    return subs(e, mapping)


# -- total derivative -------------------------------------------------------------

def _total_datom(var: str, cap: int | None):
    def datom(a: Atom):
        if a.kind == INDEP:
            return 1 if a.name == var else None
        if a.kind in (DEP, ADJ):
            if cap is not None and a.order >= cap:
                raise JetOrderError(f"jet order cap {cap} exceeded differentiating {to_text(Expr.atom(a))}")
            return a.differentiated(var)
        if a.kind == FUNC:
            if var not in a.args:
                return None
            return a.differentiated(var)
        return None
    return datom


def total_derivative(e: Expr, var: str, space: JetSpace | None = None) -> Expr:
    """D_var applied to ``e`` (chain rule through every jet coordinate)."""
    cap = None
    if space is not None:
        space.check_independent(var)
        cap = space.max_order
    return derive(e, _total_datom(var, cap))


def total_derivative_multi(e: Expr, vars_: tuple, space: JetSpace | None = None) -> Expr:
    for var in vars_:
        if e.is_zero():
            break
        e = total_derivative(e, var, space)
    return e


def explicit_partial(e: Expr, var: str) -> Expr:
    return partial(e, indep(var))


# -- variational derivative ----------------------------------------------------

def _family_atoms(e: Expr, name: str, kind: int) -> list:
    return sorted(a for a in e.atoms() if a.kind == kind and a.name == name)


def variational_derivative(L: Expr, target: str, space: JetSpace) -> Expr:
    """Euler operator: sum over stored coordinates of (-D)_J dL/du_J."""
    kind = space.dependent_kind(target)
    out = ZERO
    for a in _family_atoms(L, target, kind):
        term = total_derivative_multi(partial(L, a), a.deriv, space)
        out = out + (term if a.order % 2 == 0 else -term)
    return out


def euler_operator(L: Expr, space: JetSpace) -> dict:
    names = list(space.dependents) + list(space.adjoints)
    return {n: variational_derivative(L, n, space) for n in names}


# -- generators and prolongation ---------------------------------------------

@dataclass
class Generator:
    """X = xi^i d/dx^i + eta^a d/du^a.  Missing components are zero."""

    xi: dict = field(default_factory=dict)
    eta: dict = field(default_factory=dict)
    name: str = ""

    def xi_of(self, var: str) -> Expr:
        return self.xi.get(var, ZERO)

    def eta_of(self, dep: str) -> Expr:
        return self.eta.get(dep, ZERO)

    def validate(self, space: JetSpace) -> None:
        for k in self.xi:
            space.check_independent(k)
        for k in self.eta:
            if k not in space.dependents:
                raise JetError(f"eta component for unknown dependent {k}")
        for e in list(self.xi.values()) + list(self.eta.values()):
            for a in e.atoms():
                if a.kind == ADJ:
                    raise JetError("generator coefficients may not involve adjoint variables")
                if a.kind == PARAM:
                    raise JetError("nonlocal or parametric generator coefficients are not supported")

    def combine(self, other: "Generator", a=1, b=1) -> "Generator":
        keys_x = set(self.xi) | set(other.xi)
        keys_e = set(self.eta) | set(other.eta)
        return Generator({k: self.xi_of(k) * a + other.xi_of(k) * b for k in keys_x},
                         {k: self.eta_of(k) * a + other.eta_of(k) * b for k in keys_e})


def characteristic_of(X: Generator, space: JetSpace) -> dict:
    """W^a = eta^a - xi^j u^a_j."""
    out = {}
    for dep in space.dependents:
        w = X.eta_of(dep)
        for var in space.independents:
            xi = X.xi_of(var)
            if not xi.is_zero():
                w = w - xi * space.u(dep, var)
        out[dep] = w
    return out


def prolong(X: Generator, order: int, space: JetSpace) -> dict:
    """Coefficients zeta^a_J of d/du^a_J for every |J| <= order.

    zeta_J = D_J(W) + xi^j u_{J,j}
    """
    if order < 0:
        raise JetError("prolongation order must be nonnegative")
    W = characteristic_of(X, space)
    out = {}
    for dep in space.dependents:
        for J in multi_indices(space.independents, order):
            z = total_derivative_multi(W[dep], J, space)
            for var in space.independents:
                xi = X.xi_of(var)
                if not xi.is_zero():
                    z = z + xi * space.u(dep, *mi_add(J, (var,)))
            out[(dep, J)] = z
    return out


def apply_prolonged(X: Generator, F: Expr, space: JetSpace) -> Expr:
    """pr X (F), prolonged as far as F requires."""
    out = ZERO
    for var in space.independents:
        xi = X.xi_of(var)
        if not xi.is_zero():
            out = out + xi * explicit_partial(F, var)
    W = characteristic_of(X, space)
    for a in sorted(F.atoms()):
        if a.kind == DEP:
            z = total_derivative_multi(W[a.name], a.deriv, space)
            for var in space.independents:
                xi = X.xi_of(var)
                if not xi.is_zero():
                    z = z + xi * Expr.atom(a.differentiated(var))
            out = out + z * partial(F, a)
        elif a.kind == FUNC:
            # functions of the independents follow the base point
            for var in a.args:
                xi = X.xi_of(var)
                if not xi.is_zero():
                    out = out + xi * Expr.atom(a.differentiated(var)) * partial(F, a)
    return out


@dataclass
class SymmetryReport:
    ok: bool
    residuals: dict

    def __bool__(self):
        return self.ok


def check_symmetry(sys, X: Generator) -> SymmetryReport:
    """True iff pr X(F_a) vanishes on the solution manifold for every equation."""
    from .manifold import reduce, solve_for_leading

    X.validate(sys.space)
    ranking = solve_for_leading(sys)
    residuals = {}
    for eq in sys.equations:
        nf, _ = reduce(apply_prolonged(X, eq.expr, sys.space), ranking, certificate=False)
        residuals[eq.name] = nf
    return SymmetryReport(all(r.is_zero() for r in residuals.values()), residuals)
