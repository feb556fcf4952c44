"""Differential systems F_a = 0 over a jet space."""

from __future__ import annotations

from dataclasses import dataclass, field

from .exprcore import ADJ, DEP, FUNC, Atom, Expr, atom_text
from .jetcalc import JetError, JetSpace


class InvalidSystem(JetError):
    pass


@dataclass
class Equation:
    name: str
    expr: Expr
    lead: Atom | None = None


@dataclass
class DiffSystem:
    """Equations F_a = 0, one per dependent variable.

    ``constraints`` are side conditions on arbitrary functions (for instance
    a function declared to solve the adjoint equation); they take part in
    reduction but not in the formal Lagrangian.
    """

    space: JetSpace
    equations: list
    constraints: list = field(default_factory=list)
    multiplier: Expr | None = None

    def __post_init__(self):
        if len(self.equations) != len(self.space.dependents):
            raise InvalidSystem(
                f"{len(self.equations)} equations for {len(self.space.dependents)} dependent variables")
        for eq in self.equations:
            self._fill_lead(eq, dynamic=True)
            if any(a.kind == ADJ for a in eq.expr.atoms()):
                raise InvalidSystem(f"equation {eq.name} involves adjoint variables")
        for eq in self.constraints:
            self._fill_lead(eq, dynamic=False)
        leads = [eq.lead for eq in self.equations + self.constraints]
        if len(set(leads)) != len(leads):
            raise InvalidSystem("leading derivatives must be pairwise distinct")

    def _fill_lead(self, eq: Equation, dynamic: bool) -> None:
        if eq.lead is None:
            eq.lead = default_lead(eq.expr, self.space, self.equations.index(eq) if dynamic else None)
        if eq.lead not in eq.expr.atoms():
            raise InvalidSystem(f"equation {eq.name} does not contain its leading derivative "
                               f"{atom_text(eq.lead)}")

    @property
    def order(self) -> int:
        return max((a.order for eq in self.equations for a in eq.expr.atoms()
                    if a.kind == DEP), default=0)

    @property
    def exprs(self) -> list:
        return [eq.expr for eq in self.equations]

    def replace(self, **kw) -> "DiffSystem":
        data = dict(space=self.space, equations=[Equation(e.name, e.expr, e.lead) for e in self.equations],
                    constraints=[Equation(e.name, e.expr, e.lead) for e in self.constraints],
                    multiplier=self.multiplier)
        data.update(kw)
        return DiffSystem(**data)


def default_lead(F: Expr, space: JetSpace, index: int | None) -> Atom:
    """First-order derivative in the first independent variable when F is an
    evolution equation for its dependent, otherwise the highest-order
    derivative of that dependent (canonical order breaks ties)."""
    if index is not None:
        dep = space.dependents[index]
        cands = [a for a in F.atoms() if a.kind == DEP and a.name == dep]
    else:
        cands = [a for a in F.atoms() if a.kind == FUNC and a.deriv]
    if not cands:
        raise InvalidSystem("cannot choose a leading derivative: no candidate coordinates")
    t = space.independents[0]
    evo = [a for a in cands if a.deriv == (t,)]
    if evo:
        return evo[0]
    top = max(a.order for a in cands)
    return min(a for a in cands if a.order == top)
