"""Reduction modulo the solution manifold of a system.

Each equation is solved for its leading derivative.  Any coordinate that is
a prolongation D_K(lead) is rewritten as D_K(rhs); rewriting repeats until no
reducible coordinate remains.  The certificate records, for every rewrite,
the multiplier Q with

    e = normal_form + sum Q[(eq, K)] * D_K(lead_eq - rhs_eq).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .exprcore import (ADJ, DEP, FUNC, INDEP, PARAM, ZERO, Atom, Expr,
                       PolynomialRealization, atom_text, coefficient_split,
                       eval_numeric, partial, subs)
from .jetcalc import JetError, JetSpace, mi_sub, total_derivative_multi


class ReductionError(JetError):
    pass


@dataclass
class Rule:
    name: str
    lead: Atom
    rhs: Expr
    coefficient: Expr          # F = coefficient * (lead - rhs)

    @property
    def normalized(self) -> Expr:
        return Expr.atom(self.lead) - self.rhs


@dataclass
class Ranking:
    space: JetSpace
    rules: list
    _prolonged: dict = field(default_factory=dict, repr=False)
    _reduced: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def match(self, a: Atom):
        if a.kind in (INDEP, PARAM):
            return None
        for rule in self.rules:
            lead = rule.lead
            if a.kind == lead.kind and a.name == lead.name:
                k = mi_sub(a.deriv, lead.deriv)
                if k is not None:
                    return rule, k
        return None

    def reducible(self, a: Atom) -> bool:
        return self.match(a) is not None

    def rule_for(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def rewrite(self, a: Atom) -> Expr:
        """D_K(rhs) for a reducible coordinate a = D_K(lead); not reduced further."""
        hit = self._prolonged.get(a)
        if hit is not None:
            return hit
        rule, k = self.match(a)
        value = total_derivative_multi(rule.rhs, k, self.space)
        with self._lock:
            self._prolonged[a] = value
        return value

    def reduced_value(self, a: Atom, _stack: frozenset = frozenset()) -> Expr:
        hit = self._reduced.get(a)
        if hit is not None:
            return hit
        if a in _stack or len(_stack) > 4 * self.space.max_order + 8:
            raise ReductionError(f"rewrite cycle through {atom_text(a)}")
        e = self.rewrite(a)
        stack = _stack | {a}
        mapping = {b: self.reduced_value(b, stack) for b in e.atoms() if self.reducible(b)}
        value = subs(e, mapping)
        with self._lock:
            self._reduced[a] = value
        return value

    def is_dynamic(self, a: Atom) -> bool:
        """Coordinates treated as free jet variables when sampling points."""
        if a.kind in (DEP, ADJ):
            return True
        return a.kind == FUNC and any(r.lead.kind == FUNC and r.lead.name == a.name
                                      for r in self.rules)


def solve_for_leading(sys) -> Ranking:
    rules = []
    for eq in list(sys.equations) + list(sys.constraints):
        F, lead = eq.expr, eq.lead
        a = partial(F, lead)
        b = F - a * Expr.atom(lead)
        if a.is_zero() or lead in a.atoms() or lead in b.atoms():
            raise ReductionError(f"cannot solve for leading derivative {atom_text(lead)} "
                                 f"in equation {eq.name}")
        rhs = -b / a
        for c in rhs.atoms():
            if c.kind == lead.kind and c.name == lead.name and mi_sub(c.deriv, lead.deriv) is not None:
                raise ReductionError(f"equation {eq.name}: right-hand side for {atom_text(lead)} "
                                     f"contains the reducible coordinate {atom_text(c)}")
        rules.append(Rule(eq.name, lead, rhs, a))
    return Ranking(sys.space, rules)


def _divided_difference(e: Expr, a: Atom, r: Expr) -> Expr:
    """Q with e(a) - e(r) = (a - r) * Q."""
    A = Expr.atom(a)
    if e.den is None or a not in e.atoms():
        if e.den is not None:
            return ZERO
        out = ZERO
        for k, c in coefficient_split(e, a).items():
            if k > 0:
                s = ZERO
                for m in range(k):
                    s = s + A ** m * r ** (k - 1 - m)
                out = out + c * s
            elif k < 0:
                n = -k
                s = ZERO
                for m in range(n):
                    s = s + A ** m * r ** (n - 1 - m)
                out = out - c * s / (A ** n * r ** n)
        return out
    return (e - subs(e, {a: r})) / (A - r)


def reduce(e: Expr, ranking: Ranking, certificate: bool = True):
    """Normal form of ``e`` on the solution manifold and its certificate.

    The certificate maps (equation name, multi-index K) to Q with
    e = nf + sum Q * D_K(lead - rhs).
    """
    if not certificate:
        mapping = {a: ranking.reduced_value(a) for a in e.atoms() if ranking.reducible(a)}
        return subs(e, mapping), {}
    cert: dict = {}
    for _ in range(100000):
        red = [a for a in e.atoms() if ranking.reducible(a)]
        if not red:
            return e, {k: v for k, v in cert.items() if not v.is_zero()}
        a = max(red, key=lambda b: (b.order, b))
        rule, k = ranking.match(a)
        r = ranking.rewrite(a)
        q = _divided_difference(e, a, r)
        cert[(rule.name, k)] = cert.get((rule.name, k), ZERO) + q
        e = subs(e, {a: r})
    raise ReductionError("reduction did not terminate")


def certificate_residual(e: Expr, nf: Expr, cert: dict, ranking: Ranking) -> Expr:
    """e - nf - sum Q * D_K(G); identically zero for a valid certificate."""
    out = e - nf
    for (name, k), q in cert.items():
        out = out - q * total_derivative_multi(ranking.rule_for(name).normalized, k, ranking.space)
    return out


# -- numeric sampling ------------------------------------------------------------

def random_free_value(rng) -> float:
    """Uniform on [-2,-0.5] U [0.5,2]."""
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0))


def random_realizations(space: JetSpace, ranking: Ranking | None, rng, degree: int = 5) -> dict:
    out = {}
    for name, args in sorted(space.functions.items()):
        if ranking is not None and ranking.is_dynamic(Atom(FUNC, name, (), tuple(args))):
            continue
        out[name] = PolynomialRealization.random(tuple(args), rng, degree)
    return out


def sample_point(exprs, ranking: Ranking, rng, funcs: dict) -> dict:
    """A jet point satisfying the rewrite rules: free coordinates are random,
    reducible ones are computed from the prolonged right-hand sides."""
    point: dict = {}

    def value(a: Atom):
        if a in point:
            return point[a]
        if a.kind == INDEP:
            point[a] = random_free_value(rng)
        elif a.kind == PARAM:
            raise ReductionError(f"cannot sample unresolved parameter {a.name}")
        elif a.kind == FUNC and not ranking.is_dynamic(a):
            for arg in a.args:
                value(Atom(INDEP, arg))
            point[a] = eval_numeric(Expr.atom(a), point, funcs)
        elif ranking.reducible(a):
            e = ranking.rewrite(a)
            for b in sorted(e.atoms()):
                value(b)
            point[a] = eval_numeric(e, point, funcs)
        else:
            point[a] = random_free_value(rng)
        return point[a]

    for e in exprs:
        for a in sorted(e.atoms()):
            value(a)
    return point


def numeric_residual(e: Expr, ranking: Ranking, n_points: int = 100, seed: int = 0,
                     n_realizations: int = 1, degree: int = 5) -> float:
    """Max relative |e| over sampled manifold points.

    Relative means |value| divided by the sum of absolute term values (1 when
    that sum vanishes)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_realizations):
        funcs = random_realizations(ranking.space, ranking, rng, degree)
        for _ in range(n_points):
            point = sample_point([e], ranking, rng, funcs)
            val, scale = eval_numeric(e, point, funcs, with_scale=True)
            worst = max(worst, abs(val) / (scale if scale > 0 else 1.0))
    return worst
