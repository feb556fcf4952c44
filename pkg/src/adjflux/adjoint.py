"""Formal Lagrangians, adjoint systems and self-adjointness tests.

Self-adjointness comes in three tiers, distinguished only by the shape of the
substitution v = phi that makes the adjoint equations hold on solutions of
the original system:

* strict:     phi^a = u^a
* quasi:      phi^a depends on u alone
* nonlinear:  phi^a = phi^a(x, u), not all components zero
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .exprcore import (ADJ, DEP, PARAM, ZERO, Expr, atom_text,
                       equal_mod_nonzero_constant, param, subs)
from .jetcalc import (JetError, JetSpace, multi_indices, total_derivative_multi,
                      variational_derivative)
from .linsolve import nullspace
from .manifold import reduce, solve_for_leading
from .system import DiffSystem, Equation


class AdjointError(JetError):
    pass


def formal_lagrangian(sys: DiffSystem) -> Expr:
    """L = sum_b v^b F_b."""
    L = ZERO
    for dep, eq in zip(sys.space.dependents, sys.equations):
        L = L + sys.space.v(sys.space.adjoint_of(dep)) * eq.expr
    return L


@dataclass
class AdjointSystem:
    space: JetSpace
    lagrangian: Expr
    equations: list           # [(name, F*_a)] in dependent order

    @property
    def exprs(self) -> list:
        return [e for _, e in self.equations]

    def as_system(self) -> DiffSystem:
        """Read the adjoint equations as a system for the v-block.

        Only meaningful when they do not involve the u-block (linear case).
        """
        for _, e in self.equations:
            if any(a.kind == DEP for a in e.atoms()):
                raise AdjointError("adjoint equations involve u; cannot read them as a system for v")
        space = self.space.swapped()
        eqs = [Equation(f"{name}*", _rename_to_swapped(e, self.space)) for name, e in self.equations]
        return DiffSystem(space, eqs)


def _rename_to_swapped(e: Expr, space: JetSpace) -> Expr:
    mapping = {}
    for a in e.atoms():
        if a.kind == ADJ:
            mapping[a] = Expr.atom(a._replace(kind=DEP))
        elif a.kind == DEP:
            mapping[a] = Expr.atom(a._replace(kind=ADJ))
    return subs(e, mapping)


def adjoint_system(sys: DiffSystem) -> AdjointSystem:
    """F*_a = dL/du^a (variational derivative of the formal Lagrangian)."""
    L = formal_lagrangian(sys)
    eqs = [(eq.name, variational_derivative(L, dep, sys.space))
           for dep, eq in zip(sys.space.dependents, sys.equations)]
    return AdjointSystem(sys.space, L, eqs)


def is_linear(sys: DiffSystem) -> bool:
    for F in sys.exprs:
        if F.den is not None:
            return False
        for mono in F.num:
            if sum(e for a, e in mono if a.kind == DEP) != 1:
                return False
            if any(e < 0 for a, e in mono if a.kind == DEP):
                return False
    return True


def classical_adjoint_check(sys: DiffSystem) -> bool:
    """vL[u] - uL*[v] is a total divergence (its Euler derivatives vanish)."""
    if not is_linear(sys):
        raise AdjointError("classical adjoint identity requires linearity")
    adj = adjoint_system(sys)
    space = sys.space
    E = formal_lagrangian(sys)
    for dep, Fs in zip(space.dependents, adj.exprs):
        E = E - space.u(dep) * Fs
    names = list(space.dependents) + list(space.adjoints)
    return all(variational_derivative(E, n, space).is_zero() for n in names)


# -- substitutions ------------------------------------------------------------------

STRICT, QUASI, GENERAL = "strict", "quasi", "nonlinear"


@dataclass
class Substitution:
    """v^a = phi^a(x, u), keyed by the u-dependent name."""

    components: dict
    name: str = ""

    def phi(self, dep: str) -> Expr:
        return self.components.get(dep, ZERO)

    def validate(self, space: JetSpace) -> None:
        for dep, e in self.components.items():
            if dep not in space.dependents:
                raise AdjointError(f"substitution for unknown dependent {dep}")
            for a in e.atoms():
                if a.kind == DEP and a.deriv:
                    raise AdjointError("differential substitutions are out of scope: "
                                       f"{atom_text(a)} in component {dep}")
                if a.kind == ADJ:
                    raise AdjointError("substitution may not involve adjoint variables")
                if a.kind == PARAM:
                    raise AdjointError(f"unresolved parameter {a.name} in substitution")
        if all(self.phi(d).is_zero() for d in space.dependents):
            raise AdjointError("substitution vanishes identically")

    def kind(self, space: JetSpace) -> str:
        if all(self.phi(d) == space.u(d) for d in space.dependents):
            return STRICT
        if all(a.kind == DEP for d in space.dependents for a in self.phi(d).atoms()):
            return QUASI
        return GENERAL

    def mapping(self, e: Expr, space: JetSpace) -> dict:
        """v-block coordinates of ``e`` mapped to derivatives of phi."""
        out = {}
        for a in e.atoms():
            if a.kind == ADJ:
                out[a] = total_derivative_multi(self.phi(space.dependent_of(a.name)), a.deriv, space)
        return out

    def apply(self, e: Expr, space: JetSpace) -> Expr:
        return subs(e, self.mapping(e, space))

    def scaled(self, c) -> "Substitution":
        return Substitution({k: v * c for k, v in self.components.items()}, self.name)


@dataclass
class SelfAdjointnessReport:
    verdict: bool
    lam: list                 # lam[a][b]: coefficient of F_b in F*_a(phi)
    residual: list
    prolonged: dict = field(default_factory=dict)   # (a, b, K) -> coefficient of D_K(F_b)
    kind: str = GENERAL

    def __bool__(self):
        return self.verdict


def check_substitution(sys: DiffSystem, sub: Substitution) -> SelfAdjointnessReport:
    """Test F*_a(x, u, phi, ...) = lam^b_a F_b on solutions."""
    space = sys.space
    sub.validate(space)
    ranking = solve_for_leading(sys)
    adj = adjoint_system(sys)
    m = len(space.dependents)
    lam = [[ZERO] * m for _ in range(m)]
    residual, prolonged = [], {}
    eq_index = {eq.name: k for k, eq in enumerate(sys.equations)}
    for a, Fs in enumerate(adj.exprs):
        nf, cert = reduce(sub.apply(Fs, space), ranking)
        residual.append(nf)
        for (name, K), q in cert.items():
            rule = ranking.rule_for(name)
            if name not in eq_index:
                # side conditions on arbitrary functions carry no multiplier
                continue
            b = eq_index[name]
            if K:
                prolonged[(a, b, K)] = q
            else:
                lam[a][b] = lam[a][b] + q / rule.coefficient
    verdict = all(r.is_zero() for r in residual)
    return SelfAdjointnessReport(verdict, lam, residual, prolonged, sub.kind(space))


# -- substitution search ----------------------------------------------------------------

@dataclass
class AnsatzSpec:
    kind: str                 # "power" | "affine" | "const"
    degree: int = 2           # affine: polynomial degree of the x-coefficients
    bound: int = 6            # power: exponents in [-bound, bound] \ {0}

    @classmethod
    def parse(cls, text: str) -> "AnsatzSpec":
        head, _, arg = text.partition(":")
        if head == "power":
            return cls("power", bound=int(arg) if arg else 6)
        if head == "affine":
            if not arg:
                raise AdjointError("affine ansatz needs a degree, e.g. affine:4")
            return cls("affine", degree=int(arg))
        if head == "const":
            return cls("const")
        raise AdjointError(f"unknown ansatz {text!r}")

    def check(self) -> None:
        if self.kind == "affine" and not 0 <= self.degree <= 12:
            raise AdjointError("unbounded ansatz: affine degree must lie in [0, 12]")
        if self.kind == "power" and not 1 <= self.bound <= 50:
            raise AdjointError("unbounded ansatz: power exponent bound must lie in [1, 50]")


def _monomials(space: JetSpace, degree: int) -> list:
    out = []
    for J in multi_indices(space.independents, degree):
        e = Expr.const(1)
        for name in J:
            e = e * space.x(name)
        out.append(e)
    return out


def _linear_conditions(exprs, params) -> list:
    """Coefficient conditions (rows) for expressions linear in ``params``."""
    rows: dict = {}
    pset = set(params)
    for e in exprs:
        for mono, c in e.num.items():
            p = [a for a, _ in mono if a in pset]
            rest = tuple((a, k) for a, k in mono if a not in pset)
            row = rows.setdefault(rest, {})
            key = p[0] if p else None
            row[key] = row.get(key, 0) + c
    return [r for r in rows.values() if any(r.values())]


def _solve_template(sys, adj, ranking, template: dict, params: list):
    """Nonzero parameter values making every reduced F*(phi) vanish, or None."""
    space = sys.space
    sub = Substitution(template)
    nfs = []
    for Fs in adj.exprs:
        nf, _ = reduce(sub.apply(Fs, space), ranking, certificate=False)
        if nf.den is not None:
            nf = Expr(nf.num)
        nfs.append(nf)
    rows = _linear_conditions(nfs, params)
    if any(r.get(None) for r in rows):
        return None
    basis = nullspace([{p: r.get(p, 0) for p in params} for r in rows], params)
    for vec in basis:
        values = {p: Expr.const(vec.get(p, 0)) for p in params}
        comps = {d: subs(e, values) for d, e in template.items()}
        if any(not c.is_zero() for c in comps.values()):
            return comps
    return None


def find_substitution(sys: DiffSystem, ansatz: AnsatzSpec) -> Substitution | None:
    """Search a closed template family for v = phi(x, u); first match wins."""
    ansatz.check()
    space = sys.space
    ranking = solve_for_leading(sys)
    adj = adjoint_system(sys)
    deps = space.dependents
    if ansatz.kind == "const":
        params = [param(f"c{k}") for k in range(len(deps))]
        template = {d: Expr.atom(p) for d, p in zip(deps, params)}
        comps = _solve_template(sys, adj, ranking, template, params)
        return Substitution(comps, "const") if comps else None
    if ansatz.kind == "power":
        ks = [k for k in range(1, ansatz.bound + 1)]
        order = sorted({k for k in ks} | {-k for k in ks}, key=lambda k: (abs(k), k))
        for exps in sorted(itertools.product(order, repeat=len(deps)),
                           key=lambda t: (sum(abs(k) for k in t), t)):
            params = [param(f"c{k}") for k in range(len(deps))]
            template = {d: Expr.atom(p) * space.u(d) ** k for d, p, k in zip(deps, params, exps)}
            comps = _solve_template(sys, adj, ranking, template, params)
            if comps:
                return Substitution(comps, "power")
        return None
    if ansatz.kind == "affine":
        monos = _monomials(space, ansatz.degree)
        params, template = [], {}
        for d in deps:
            phi = ZERO
            for tag in ["1"] + list(deps):
                factor = Expr.const(1) if tag == "1" else space.u(tag)
                for k, mono in enumerate(monos):
                    p = param(f"a_{d}_{tag}_{k}")
                    params.append(p)
                    phi = phi + Expr.atom(p) * mono * factor
            template[d] = phi
        comps = _solve_template(sys, adj, ranking, template, params)
        return Substitution(comps, f"affine:{ansatz.degree}") if comps else None
    raise AdjointError(f"unknown ansatz {ansatz.kind!r}")


# -- multiplier form -------------------------------------------------------------------

def multiplier_form(sys: DiffSystem, sub: Substitution) -> DiffSystem:
    """Rewrite a scalar equation as mu F = 0 with mu = phi/u (strictly self-adjoint)."""
    space = sys.space
    if len(space.dependents) != 1:
        raise AdjointError("multiplier form defined for scalar equations only")
    dep = space.dependents[0]
    sub.validate(space)
    mu = sub.phi(dep) / space.u(dep)
    if mu.is_zero():
        raise AdjointError("multiplier vanishes")
    eq = sys.equations[0]
    return sys.replace(equations=[Equation(eq.name, mu * eq.expr, eq.lead)], multiplier=mu)


def strict_substitution(space: JetSpace) -> Substitution:
    return Substitution({d: space.u(d) for d in space.dependents}, "strict")


def adjoint_matches(sys: DiffSystem, expected: list) -> list[Fraction | None]:
    """Per-equation constant factors c with F*_a = c * expected_a (None = mismatch)."""
    return [equal_mod_nonzero_constant(e, x) for e, x in zip(adjoint_system(sys).exprs, expected)]

