"""Exact symbolic expressions over jet coordinates.

An :class:`Expr` is a rational function with rational coefficients, held
permanently in canonical form: an expanded numerator over an expanded
denominator.  Monomial denominators are absorbed into the numerator as
negative exponents, so Laurent polynomials (``x^2*u^-1``, ``u^-2``) have a
trivial denominator and compare structurally.  Only genuinely non-monomial
denominators keep an explicit quotient.

Atoms are small named tuples ``(kind, name, deriv, args)``; ``deriv`` is the
sorted multi-index of differentiation variables.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Callable, Iterable, Mapping, NamedTuple

INDEP, DEP, ADJ, FUNC, PARAM = range(5)


class ZeroDenominator(ZeroDivisionError):
    pass


class NumericSingularity(ArithmeticError):
    pass


class UnassignedSymbols(KeyError):
    def __init__(self, missing: Iterable[str]):
        self.missing = sorted(set(missing))
        super().__init__("unassigned symbols: " + ", ".join(self.missing))


class Atom(NamedTuple):
    kind: int
    name: str
    deriv: tuple = ()
    args: tuple = ()

    @property
    def order(self) -> int:
        return len(self.deriv)

    def base(self) -> "Atom":
        return self._replace(deriv=())

    def differentiated(self, var: str) -> "Atom":
        return self._replace(deriv=tuple(sorted(self.deriv + (var,))))

    def is_jet(self) -> bool:
        return self.kind in (DEP, ADJ)

    def __str__(self) -> str:
        return atom_text(self)


def indep(name: str) -> Atom:
    return Atom(INDEP, name)


def jet(name: str, *deriv: str, adjoint: bool = False) -> Atom:
    return Atom(ADJ if adjoint else DEP, name, tuple(sorted(deriv)))


def func(name: str, args: tuple, *deriv: str) -> Atom:
    return Atom(FUNC, name, tuple(sorted(deriv)), tuple(args))


def param(name: str) -> Atom:
    return Atom(PARAM, name)


def atom_text(a: Atom) -> str:
    if a.kind in (INDEP, PARAM) or not a.deriv:
        return a.name
    if a.kind == FUNC and len(a.args) == 1:
        return a.name + "'" * len(a.deriv)
    return "D[" + ",".join((a.name,) + a.deriv) + "]"


# -- polynomial helpers ---------------------------------------------------
# A polynomial is a dict {monomial: Fraction}; a monomial is a sorted tuple of
# (Atom, nonzero int exponent) pairs.

_ONE = Fraction(1)


def _mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for k, e in b:
        n = d.get(k, 0) + e
        if n:
            d[k] = n
        else:
            del d[k]
    return tuple(sorted(d.items()))


def _mono_pow(a: tuple, n: int) -> tuple:
    return tuple((k, e * n) for k, e in a) if n else ()


def _p_add(a: dict, b: dict, scale: Fraction = _ONE) -> dict:
    out = dict(a)
    for m, c in b.items():
        n = out.get(m, 0) + c * scale
        if n:
            out[m] = n
        else:
            out.pop(m, None)
    return out


def _p_mul(a: dict, b: dict) -> dict:
    if len(a) < len(b):
        a, b = b, a
    out: dict = {}
    for mb, cb in b.items():
        for ma, ca in a.items():
            m = _mono_mul(ma, mb)
            n = out.get(m, 0) + ca * cb
            if n:
                out[m] = n
            else:
                out.pop(m, None)
    return out


def _p_mono(a: dict, mono: tuple, c: Fraction = _ONE) -> dict:
    return {_mono_mul(m, mono): v * c for m, v in a.items()}


def _lex_key(atoms: list):
    def key(mono: tuple):
        d = dict(mono)
        return tuple(d.get(a, 0) for a in atoms)
    return key


def _exact_divide(p: dict, d: dict) -> dict | None:
    """Exact division of polynomials with nonnegative exponents, or None."""
    atoms = sorted({a for m in list(p) + list(d) for a, _ in m})
    key = _lex_key(atoms)
    lt_d = max(d, key=key)
    lc_d = d[lt_d]
    quot: dict = {}
    rem = dict(p)
    for _ in range(10000):
        if not rem:
            return quot
        lt = max(rem, key=key)
        q = _mono_mul(lt, _mono_pow(lt_d, -1))
        if any(e < 0 for _, e in q):
            return None
        c = rem[lt] / lc_d
        quot[q] = quot.get(q, 0) + c
        rem = _p_add(rem, _p_mono(d, q, c), Fraction(-1))
    return None


def _normalize_pair(num: dict, den: dict | None) -> tuple[dict, dict | None]:
    if not num:
        return {}, None
    if den is None:
        return num, None
    if not den:
        raise ZeroDenominator("zero denominator")
    if len(den) == 1:
        ((m, c),) = den.items()
        return _p_mono(num, _mono_pow(m, -1), 1 / c), None
    # pull the monomial content out of the denominator
    atoms = {a for m in den for a, _ in m}
    content = []
    for a in sorted(atoms):
        low = min(dict(m).get(a, 0) for m in den)
        if low:
            content.append((a, low))
    if content:
        inv = _mono_pow(tuple(content), -1)
        den = _p_mono(den, inv)
        num = _p_mono(num, inv)
    lead = min(den, key=_print_key)
    lc = den[lead]
    if lc != 1:
        den = {m: c / lc for m, c in den.items()}
        num = {m: c / lc for m, c in num.items()}
    # shift the numerator to nonnegative exponents and try exact division
    shift = []
    for a in sorted({a for m in num for a, _ in m}):
        low = min(dict(m).get(a, 0) for m in num)
        if low < 0:
            shift.append((a, -low))
    shift_m = tuple(shift)
    q = _exact_divide(_p_mono(num, shift_m), den)
    if q is not None:
        return _p_mono(q, _mono_pow(shift_m, -1)), None
    if len(num) > 1:
        q = _exact_divide(den, _p_mono(num, shift_m))
        if q is not None:
            return _normalize_pair({(): _ONE}, _p_mono(q, _mono_pow(shift_m, -1)))
    return num, den


def _coerce(x) -> "Expr":
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Expr.const(x)
    if isinstance(x, Atom):
        return Expr.atom(x)
    return NotImplemented


class Expr:
    """Immutable canonical rational expression."""

    __slots__ = ("num", "den", "_hash")

    def __init__(self, num: dict, den: dict | None = None, _normalized: bool = False):
        if not _normalized:
            num, den = _normalize_pair({m: Fraction(c) for m, c in num.items() if c}, den)
        self.num = num
        self.den = den
        self._hash = None

    # constructors
    @staticmethod
    def const(c) -> "Expr":
        c = Fraction(c)
        return Expr({(): c} if c else {}, None, True)

    @staticmethod
    def atom(a: Atom) -> "Expr":
        return Expr({((a, 1),): _ONE}, None, True)

    # queries
    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return self.den is None and all(not m for m in self.num)

    def constant_value(self) -> Fraction | None:
        if not self.num:
            return Fraction(0)
        if self.is_constant():
            return self.num[()]
        return None

    def is_polynomial(self) -> bool:
        return self.den is None

    def atoms(self) -> set:
        out = {a for m in self.num for a, _ in m}
        if self.den:
            out |= {a for m in self.den for a, _ in m}
        return out

    def terms(self) -> list[tuple[Fraction, tuple]]:
        """Numerator terms in deterministic order."""
        return [(self.num[m], m) for m in sorted(self.num, key=_print_key)]

    def degree_in(self, a: Atom) -> int:
        return max((dict(m).get(a, 0) for m in self.num), default=0)

    # arithmetic
    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not other.num:
            return self
        if not self.num:
            return other
        if self.den is None and other.den is None:
            return Expr(_p_add(self.num, other.num), None, True)
        if self.den == other.den:
            return Expr(_p_add(self.num, other.num), self.den)
        sd = self.den or {(): _ONE}
        od = other.den or {(): _ONE}
        return Expr(_p_add(_p_mul(self.num, od), _p_mul(other.num, sd)), _p_mul(sd, od))

    __radd__ = __add__

    def __neg__(self):
        return Expr({m: -c for m, c in self.num.items()}, self.den, True)

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not self.num or not other.num:
            return ZERO
        if self.den is None and other.den is None:
            return Expr(_p_mul(self.num, other.num), None, True)
        if self.den is None or other.den is None:
            den = self.den or other.den
        else:
            den = _p_mul(self.den, other.den)
        return Expr(_p_mul(self.num, other.num), den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not other.num:
            raise ZeroDenominator("zero denominator")
        num = self.num if other.den is None else _p_mul(self.num, other.den)
        den = other.num if self.den is None else _p_mul(self.den, other.num)
        return Expr(num, den)

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer exponents are supported")
        if n < 0:
            return ONE / (self ** -n)
        if len(self.num) == 1 and self.den is None:
            ((m, c),) = self.num.items()
            return Expr({_mono_pow(m, n): c ** n}, None, True)
        result, base = ONE, self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # comparison: structural equality of canonical forms
    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return False
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self.num.items()),
                               frozenset(self.den.items()) if self.den else None))
        return self._hash

    def equals(self, other) -> bool:
        """Mathematical equality, robust to uncancelled common factors."""
        return (self - _coerce(other)).is_zero()

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Expr({to_text(self)!r})"


ZERO = Expr({}, None, True)
ONE = Expr.const(1)


def normalize(e) -> Expr:
    """Canonical form of ``e``.

    Accepts an :class:`Expr` (already canonical, returned unchanged) or a raw
    nested tree ``("+", a, b, ...)``, ``("*", ...)``, ``("/", a, b)``,
    ``("^", a, n)``, ``("-", a)`` with atoms, ints and Fractions as leaves.
    """
    if isinstance(e, Expr):
        return e
    if isinstance(e, (int, Fraction)):
        return Expr.const(e)
    if isinstance(e, Atom):
        return Expr.atom(e)
    op, *kids = e
    if op == "+":
        out = ZERO
        for k in kids:
            out = out + normalize(k)
        return out
    if op == "*":
        out = ONE
        for k in kids:
            out = out * normalize(k)
        return out
    if op == "-":
        if len(kids) == 1:
            return -normalize(kids[0])
        return normalize(kids[0]) - normalize(kids[1])
    if op == "/":
        return normalize(kids[0]) / normalize(kids[1])
    if op == "^":
        return normalize(kids[0]) ** int(kids[1])
    raise ValueError(f"unknown node {op!r}")


def equal_mod_nonzero_constant(a: Expr, b: Expr) -> Fraction | None:
    """Return c != 0 with a = c*b, or None."""
    if a.is_zero() or b.is_zero():
        return None
    if a.den != b.den:
        ratio = a / b
        c = ratio.constant_value()
        return c if c else None
    m = min(b.num, key=_print_key)
    if m not in a.num:
        return None
    c = a.num[m] / b.num[m]
    return c if (a - b * c).is_zero() else None


# -- calculus primitives ----------------------------------------------------

def _poly_derive(p: dict, datom: Callable[[Atom], object]) -> dict:
    """Apply a derivation defined on atoms.  ``datom`` returns None (zero),
    1 (unit) or an Atom."""
    out: dict = {}
    for mono, c in p.items():
        for idx, (a, e) in enumerate(mono):
            d = datom(a)
            if d is None:
                continue
            rest = list(mono)
            if e == 1:
                del rest[idx]
            else:
                rest[idx] = (a, e - 1)
            if d == 1:
                m = tuple(rest)
            else:
                m = _mono_mul(tuple(rest), ((d, 1),))
            n = out.get(m, 0) + c * e
            if n:
                out[m] = n
            else:
                out.pop(m, None)
    return out


def derive(e: Expr, datom: Callable[[Atom], object]) -> Expr:
    num = _poly_derive(e.num, datom)
    if e.den is None:
        return Expr(num, None, True)
    dden = _poly_derive(e.den, datom)
    top = _p_add(_p_mul(num, e.den), _p_mul(e.num, dden), Fraction(-1))
    return Expr(top, _p_mul(e.den, e.den))


def partial(e: Expr, a: Atom) -> Expr:
    """Partial derivative with respect to a single atom."""
    return derive(e, lambda b: 1 if b == a else None)


def subs(e: Expr, mapping: Mapping[Atom, Expr]) -> Expr:
    """Replace atoms by expressions."""
    if not mapping or not (e.atoms() & mapping.keys()):
        return e
    cache: dict = {}

    def poly_subs(p: dict) -> Expr:
        plain: dict = {}
        total = ZERO
        for mono, c in p.items():
            hit = [(a, k) for a, k in mono if a in mapping]
            if not hit:
                plain[mono] = plain.get(mono, 0) + c
                continue
            keep = tuple((a, k) for a, k in mono if a not in mapping)
            term = Expr({keep: c}, None, True)
            for a, k in hit:
                key = (a, k)
                if key not in cache:
                    cache[key] = mapping[a] ** k
                term = term * cache[key]
            total = total + term
        return total + Expr({m: c for m, c in plain.items() if c}, None, True)

    num = poly_subs(e.num)
    if e.den is None:
        return num
    return num / poly_subs(e.den)


def coefficient_split(e: Expr, a: Atom) -> dict[int, Expr]:
    """Group a polynomial expression by the power of ``a``."""
    if e.den is not None:
        raise ValueError("coefficient_split requires a Laurent polynomial")
    groups: dict = {}
    for mono, c in e.num.items():
        d = dict(mono)
        k = d.pop(a, 0)
        groups.setdefault(k, {})[tuple(sorted(d.items()))] = c
    return {k: Expr(p, None, True) for k, p in groups.items()}


# -- printing -----------------------------------------------------------------

def _print_key(mono: tuple):
    return (-sum(e for a, e in mono if a.kind in (DEP, ADJ)), mono)


def _fmt_coeff(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def _poly_text(p: dict) -> str:
    if not p:
        return "0"
    parts = []
    for mono in sorted(p, key=_print_key):
        c = p[mono]
        factors = [atom_text(a) + (f"^{e}" if e != 1 else "") for a, e in mono]
        mag = abs(c)
        if not factors:
            body = _fmt_coeff(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = _fmt_coeff(mag) + "*" + "*".join(factors)
        if not parts:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append((" - " if c < 0 else " + ") + body)
    return "".join(parts)


def to_text(e: Expr) -> str:
    """Deterministic DSL-syntax rendering."""
    if e.den is None:
        return _poly_text(e.num)
    return f"({_poly_text(e.num)})/({_poly_text(e.den)})"


# -- numeric evaluation ---------------------------------------------------------

class PolynomialRealization:
    """Concrete polynomial standing in for an arbitrary function.

    ``coeffs`` maps exponent tuples (one entry per argument) to floats.
    """

    def __init__(self, args: tuple, coeffs: Mapping[tuple, float]):
        self.args = tuple(args)
        self.coeffs = dict(coeffs)

    @classmethod
    def random(cls, args: tuple, rng, degree: int = 5) -> "PolynomialRealization":
        coeffs = {}
        for exps in itertools.product(range(degree + 1), repeat=len(args)):
            if sum(exps) <= degree:
                coeffs[exps] = float(rng.uniform(-1.0, 1.0))
        return cls(args, coeffs)

    def __call__(self, deriv: tuple, values: Mapping[str, float]) -> float:
        counts = [deriv.count(a) for a in self.args]
        total = 0.0
        for exps, c in self.coeffs.items():
            term = c
            for k, (e, n) in enumerate(zip(exps, counts)):
                if e < n:
                    term = 0.0
                    break
                term *= math.perm(e, n) * values[self.args[k]] ** (e - n)
            total += term
        return total


def _atom_value(a: Atom, point: Mapping, funcs: Mapping | None, missing: list):
    if a in point:
        return float(point[a])
    s = atom_text(a)
    if s in point:
        return float(point[s])
    if a.kind == FUNC and funcs and a.name in funcs:
        vals = {}
        for arg in a.args:
            v = point.get(indep(arg), point.get(arg))
            if v is None:
                missing.append(arg)
                return None
            vals[arg] = float(v)
        return funcs[a.name](a.deriv, vals)
    missing.append(s)
    return None


def _poly_eval(p: dict, values: Mapping[Atom, float]) -> tuple[float, float]:
    total = 0.0
    scale = 0.0
    for mono, c in p.items():
        t = float(c)
        for a, e in mono:
            v = values[a]
            if e < 0 and abs(v) < 1e-12:
                raise NumericSingularity("numeric singularity")
            t *= v ** e
        total += t
        scale += abs(t)
    return total, scale


def eval_numeric(e: Expr, point: Mapping, funcs: Mapping | None = None,
                 with_scale: bool = False):
    """Evaluate ``e`` in double precision.

    ``point`` maps atoms (or their printed names) to numbers; ``funcs`` maps
    arbitrary-function names to realizations called as ``f(deriv, values)``.
    With ``with_scale`` the sum of absolute term values is returned as well.
    """
    missing: list = []
    values = {a: _atom_value(a, point, funcs, missing) for a in e.atoms()}
    if missing:
        raise UnassignedSymbols(missing)
    val, scale = _poly_eval(e.num, values)
    if e.den is not None:
        dv, dscale = _poly_eval(e.den, values)
        if abs(dv) < 1e-12:
            raise NumericSingularity("numeric singularity")
        val /= dv
        scale /= abs(dv)
    return (val, scale) if with_scale else val
