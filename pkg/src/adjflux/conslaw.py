"""Conserved vectors from symmetries of self-adjoint systems.

For a symmetry X with characteristic W^a = eta^a - xi^j u^a_j and the formal
Lagrangian L,

    C^i = xi^i L + sum_{J,K} w(i,J,K) D_J(W^a) (-D)_K (dL/du^a_{iJK})

where J, K run over sorted multi-indices and the weight
w = N(J) N(K) / N(iJK) (N = number of distinct orderings) accounts for
storing each mixed derivative once.  Adjoint variables are then eliminated
with a substitution v = phi(x, u).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .adjoint import Substitution, check_substitution, formal_lagrangian
from .exprcore import (DEP, ZERO, Atom, Expr, _mono_mul,
                       equal_mod_nonzero_constant, partial, to_text)
from .jetcalc import (Generator, JetError, characteristic_of, mi_permutations,
                      mi_sub, sub_multi_indices, total_derivative,
                      total_derivative_multi)
from .linsolve import solve
from .manifold import Ranking, numeric_residual, reduce, solve_for_leading
from .system import DiffSystem


class ConservationError(JetError):
    pass


@dataclass
class ConservedVector:
    components: tuple
    system: DiffSystem
    generator: Generator | None = None
    substitution: Substitution | None = None
    stripped: bool = False

    @property
    def space(self):
        return self.system.space

    def divergence(self) -> Expr:
        out = ZERO
        for var, c in zip(self.space.independents, self.components):
            out = out + total_derivative(c, var, self.space)
        return out

    def __iter__(self):
        return iter(self.components)

    def text(self) -> list[str]:
        return [f"C[{v}] = {to_text(c)}" for v, c in zip(self.space.independents, self.components)]


def characteristic(X: Generator, space) -> dict:
    """W^a = eta^a - xi^j u^a_j for each dependent."""
    X.validate(space)
    return characteristic_of(X, space)


def raw_vector(sys: DiffSystem, X: Generator) -> tuple:
    """Components before eliminating the adjoint variables."""
    space = sys.space
    L = formal_lagrangian(sys)
    W = characteristic(X, space)
    jets = sorted(a for a in L.atoms() if a.kind == DEP)
    comps = []
    for var in space.independents:
        C = X.xi_of(var) * L
        for a in jets:
            rest = mi_sub(a.deriv, (var,))
            if rest is None:
                continue
            dL = partial(L, a)
            n_full = mi_permutations(a.deriv)
            for J, K in sub_multi_indices(rest):
                w = Fraction(mi_permutations(J) * mi_permutations(K), n_full)
                if len(K) % 2:
                    w = -w
                C = C + total_derivative_multi(W[a.name], J, space) \
                    * total_derivative_multi(dL, K, space) * w
        comps.append(C)
    return tuple(comps)


def conserved_vector(sys: DiffSystem, X: Generator, sub: Substitution,
                     force: bool = False) -> ConservedVector:
    space = sys.space
    X.validate(space)
    sub.validate(space)
    if not force:
        rep = check_substitution(sys, sub)
        if not rep.verdict:
            res = "; ".join(to_text(r) for r in rep.residual)
            raise ConservationError(f"substitution {sub.name or ''} does not make the system "
                                    f"self-adjoint; residual: {res}")
    comps = tuple(sub.apply(c, space) for c in raw_vector(sys, X))
    return ConservedVector(comps, sys, X, sub)


@dataclass
class VerificationReport:
    symbolic_ok: bool
    normal_form: Expr
    certificate: dict
    multipliers: dict          # equation name -> coefficient of F (unprolonged part)
    numeric_max: float
    seed: int
    n_points: int
    n_realizations: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.symbolic_ok and self.numeric_max <= self.tol

    def lines(self) -> list[str]:
        out = [f"verdict: {'pass' if self.passed else 'fail'}",
               f"symbolic: {'zero' if self.symbolic_ok else 'nonzero'}",
               f"normal_form: {to_text(self.normal_form)}"]
        for name in sorted(self.multipliers):
            out.append(f"multiplier[{name}]: {to_text(self.multipliers[name])}")
        for (name, K), q in sorted(self.certificate.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            if K:
                out.append(f"certificate[D[{name},{','.join(K)}]]: {to_text(q)}")
        out += [f"numeric_max: {self.numeric_max:.3e}", f"tolerance: {self.tol:g}",
                f"points: {self.n_points} x {self.n_realizations}", f"seed: {self.seed}"]
        return out


def verify(cv: ConservedVector, seed: int = 0, n_points: int = 100, tol: float = 1e-9,
           n_realizations: int = 1) -> VerificationReport:
    """Check D_i C^i = 0 on solutions, symbolically and at sampled points."""
    ranking = solve_for_leading(cv.system)
    div = cv.divergence()
    nf, cert = reduce(div, ranking)
    mult = {}
    for (name, K), q in cert.items():
        if not K:
            mult[name] = q / ranking.rule_for(name).coefficient
    worst = 0.0 if div.is_zero() else numeric_residual(div, ranking, n_points, seed, n_realizations)
    return VerificationReport(nf.is_zero(), nf, cert, mult, worst, seed, n_points,
                              n_realizations, tol)


# -- trivial parts ------------------------------------------------------------------

def _dynamic_atoms(mono, ranking: Ranking):
    return [a for a, _ in mono if ranking.is_dynamic(a)]


def _off_direction(mono, var: str, ranking: Ranking) -> list:
    """(atom, direction) pairs where a jet coordinate is differentiated
    along a direction other than ``var``."""
    out = []
    for a in _dynamic_atoms(mono, ranking):
        for d in sorted(set(a.deriv)):
            if d != var:
                out.append((a, d))
    return out


def _aliases(ranking: Ranking) -> dict:
    """Coordinates that equal c * (a leading derivative) on solutions."""
    out = {}
    for rule in ranking.rules:
        rhs = rule.rhs
        if rhs.den is None and len(rhs.num) == 1:
            ((mono, c),) = rhs.num.items()
            if len(mono) == 1 and mono[0][1] == 1:
                out[mono[0][0]] = rule.lead
    return out


def _lower(a: Atom, d: str) -> Atom:
    return a._replace(deriv=mi_sub(a.deriv, (d,)))


def _antiderivative_candidates(mono, var: str, ranking: Ranking, aliases: dict) -> set:
    out = set()
    for a, d in _off_direction(mono, var, ranking):
        out.add((d, _mono_mul(mono, ((a, -1), (_lower(a, d), 1)))))
    for b, lead in aliases.items():
        if any(x == b for x, _ in mono):
            for d in sorted(set(lead.deriv)):
                if d != var:
                    out.add((d, _mono_mul(mono, ((b, -1), (_lower(lead, d), 1)))))
    return out


def _drop_pure(comps: list, space, ranking: Ranking) -> list:
    pure = []
    for c in comps:
        if c.den is not None:
            pure.append(ZERO)
            continue
        pure.append(Expr({m: k for m, k in c.num.items() if not _dynamic_atoms(m, ranking)},
                         None, True))
    div = ZERO
    for var, p in zip(space.independents, pure):
        div = div + total_derivative(p, var, space)
    if div.is_zero():
        return [c - p for c, p in zip(comps, pure)]
    return comps


def strip_trivial(cv: ConservedVector, rounds: int = 5) -> ConservedVector:
    """Remove parts that vanish on solutions and curl-type trivial parts.

    The result has no component C^i containing a jet coordinate
    differentiated along a direction other than x^i; this is arranged by
    subtracting T^i = D_j A^{ij} (A antisymmetric) with A solved for exactly.
    """
    space = cv.space
    ranking = solve_for_leading(cv.system)
    names = list(space.independents)
    comps = [reduce(c, ranking, certificate=False)[0] for c in cv.components]
    comps = _drop_pure(comps, space, ranking)
    if any(c.den is not None for c in comps):
        return ConservedVector(tuple(comps), cv.system, cv.generator, cv.substitution, False)
    aliases = _aliases(ranking)

    contrib: dict = {}          # (i, j, mono) -> (T^i part, T^j part)

    def add_candidates(i: int, e: Expr, pending: set):
        for mono in e.num:
            for d, cand in _antiderivative_candidates(mono, names[i], ranking, aliases):
                j = names.index(d)
                key = (min(i, j), max(i, j), cand)
                if key not in contrib:
                    pending.add(key)

    pending: set = set()
    for i, c in enumerate(comps):
        add_candidates(i, c, pending)
    for _ in range(rounds):
        if not pending:
            break
        fresh, pending = pending, set()
        for key in sorted(fresh, key=repr):
            i, j, mono = key
            B = Expr({mono: Fraction(1)}, None, True)
            ti = reduce(total_derivative(B, names[j], space), ranking, certificate=False)[0]
            tj = -reduce(total_derivative(B, names[i], space), ranking, certificate=False)[0]
            contrib[key] = (ti, tj)
            add_candidates(i, ti, pending)
            add_candidates(j, tj, pending)

    keys = sorted(contrib, key=repr)
    # forbidden coefficients, per component
    rows, rhs = [], []
    index: dict = {}
    for i, c in enumerate(comps):
        for mono, k in c.num.items():
            if _off_direction(mono, names[i], ranking):
                index.setdefault((i, mono), {})
    for col, key in enumerate(keys):
        i, j, _ = key
        for comp, part in ((i, contrib[key][0]), (j, contrib[key][1])):
            for mono, k in part.num.items():
                if _off_direction(mono, names[comp], ranking):
                    index.setdefault((comp, mono), {})[col] = k
    for (comp, mono), row in index.items():
        rows.append(row)
        rhs.append(comps[comp].num.get(mono, Fraction(0)))
    sol = solve(rows, rhs, list(range(len(keys))))
    if sol is None:
        return ConservedVector(tuple(comps), cv.system, cv.generator, cv.substitution, False)
    out = list(comps)
    for col, val in sol.items():
        if not val:
            continue
        i, j, _ = keys[col]
        ti, tj = contrib[keys[col]]
        out[i] = out[i] - ti * val
        out[j] = out[j] - tj * val
    out = _drop_pure(out, space, ranking)
    return ConservedVector(tuple(out), cv.system, cv.generator, cv.substitution, True)


def proportional_vectors(a, b) -> Fraction | None:
    """Common constant c with a^i = c b^i for every component, or None."""
    c = None
    for x, y in zip(a, b):
        if x.is_zero() and y.is_zero():
            continue
        k = equal_mod_nonzero_constant(x, y)
        if k is None or (c is not None and k != c):
            return None
        c = k
    return c


def combine_generators(X: Generator, Y: Generator, a=1, b=1) -> Generator:
    return X.combine(Y, a, b)
