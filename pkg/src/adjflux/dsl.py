"""Model-file language: lexer, recursive-descent parser and printer.

    independents t x y
    dependents u w
    adjoint v z                      # optional, defaults to v / v1, v2, ...
    arbitrary f(t) g(t)
    option tol = 1e-9
    equation F1: D[u,t] - u*D[u,x] - D[u,x,x,x] - D[w,y] = 0 lead D[u,t]
    constraint C: D[phi,t] + D[phi,x,x] = 0 lead D[phi,t]
    symmetry Xh { xi[x] = h; eta[u] = -h'; eta[w] = -h''*y; }
    substitution uu { v[u] = u; v[w] = w; }

Expressions use + - * / ^ (integer exponents, right associative), rational
literals such as 1/2, jet coordinates D[u,x,x], function derivatives f' or
D[phi,t,x], and total derivatives of subexpressions D[(expr), x].
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .adjoint import Substitution
from .exprcore import ZERO, Expr, atom_text, func, indep, jet, to_text
from .jetcalc import Generator, JetError, JetSpace, total_derivative_multi
from .system import DiffSystem, Equation

KEYWORDS = {"independents", "dependents", "adjoint", "arbitrary", "equation", "constraint",
            "symmetry", "substitution", "option", "lead"}


class DslError(Exception):
    kind = "error"

    def __init__(self, message: str, line: int = 0, col: int = 0, expected=()):
        self.message, self.line, self.col = message, line, col
        self.expected = sorted(set(expected))
        where = f" at {line}:{col}" if line else ""
        text = f"{self.kind} error{where}: {message}"
        if self.expected:
            text += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(text)


class LexError(DslError):
    kind = "lexical"


class ParseError(DslError):
    kind = "syntax"


class SemanticError(DslError):
    kind = "semantic"


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<op>[-+*/^()\[\],:;{}=])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    out, pos, line, start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise LexError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, m.start() - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


@dataclass
class ModelFile:
    space: JetSpace
    equations: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    symmetries: dict = field(default_factory=dict)
    substitutions: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def system(self) -> DiffSystem:
        return DiffSystem(self.space, [Equation(e.name, e.expr, e.lead) for e in self.equations],
                          [Equation(e.name, e.expr, e.lead) for e in self.constraints])

    def symmetry(self, name: str) -> Generator:
        if name not in self.symmetries:
            raise SemanticError(f"unknown symmetry {name!r}; have {sorted(self.symmetries)}")
        return self.symmetries[name]

    def substitution(self, name: str) -> Substitution:
        if name not in self.substitutions:
            raise SemanticError(f"unknown substitution {name!r}; have {sorted(self.substitutions)}")
        return self.substitutions[name]

    def parse_expr(self, text: str) -> Expr:
        p = _Parser(tokenize(text))
        p.space = self.space
        e = p.expr()
        p.expect_kind("eof")
        return e


class _Parser:
    def __init__(self, tokens: list):
        self.toks = tokens
        self.i = 0
        self.decl = {"independents": [], "dependents": [], "adjoint": [], "arbitrary": {}}
        self.space: JetSpace | None = None

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, expected=()):
        t = self.tok
        return ParseError(msg, t.line, t.col, expected)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            return self.advance()
        raise self.error(f"unexpected {self.tok.text or 'end of input'!r}", [repr(text)])

    def expect_kind(self, kind: str) -> Token:
        if self.tok.kind == kind:
            return self.advance()
        raise self.error(f"unexpected {self.tok.text or 'end of input'!r}", [kind])

    def ident(self) -> Token:
        if self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
            return self.advance()
        raise self.error(f"unexpected {self.tok.text or 'end of input'!r}", ["identifier"])

    # model
    def model(self, options=None) -> ModelFile:
        model = None
        opts = {}
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind != "ident" or t.text not in KEYWORDS - {"lead"}:
                raise self.error(f"unexpected {t.text!r}", sorted(KEYWORDS - {"lead"}))
            self.advance()
            if t.text in ("independents", "dependents", "adjoint"):
                if self.space is not None:
                    raise SemanticError("declarations must precede equations", t.line, t.col)
                names = []
                while self.tok.kind == "ident" and self.tok.text not in KEYWORDS:
                    names.append(self.advance().text)
                if not names:
                    raise self.error("empty declaration", ["identifier"])
                self.decl[t.text] += names
                continue
            if t.text == "arbitrary":
                if self.space is not None:
                    raise SemanticError("declarations must precede equations", t.line, t.col)
                while True:
                    name = self.ident().text
                    self.expect("(")
                    args = [self.ident().text]
                    while self.accept(","):
                        args.append(self.ident().text)
                    self.expect(")")
                    self.decl["arbitrary"][name] = tuple(args)
                    if not self.accept(",") and not (self.tok.kind == "ident"
                                                     and self.tok.text not in KEYWORDS):
                        break
                continue
            if t.text == "option":
                key = self.ident().text
                self.expect("=")
                val = self.advance()
                if val.kind not in ("num", "ident"):
                    raise self.error("bad option value", ["number", "identifier"])
                opts[key] = val.text
                continue
            if model is None:
                model = ModelFile(self.build_space(t))
            if t.text in ("equation", "constraint"):
                name = self.ident().text
                self.expect(":")
                lhs = self.expr()
                self.expect("=")
                rhs = self.expr()
                lead = None
                if self.accept("lead"):
                    lead_tok = self.tok
                    e = self.primary()
                    if len(e.num) != 1 or e.den is not None:
                        raise SemanticError("lead must be a single coordinate", lead_tok.line, lead_tok.col)
                    ((mono, c),) = e.num.items()
                    if c != 1 or len(mono) != 1 or mono[0][1] != 1:
                        raise SemanticError("lead must be a single coordinate", lead_tok.line, lead_tok.col)
                    lead = mono[0][0]
                target = model.equations if t.text == "equation" else model.constraints
                target.append(Equation(name, lhs - rhs, lead))
            elif t.text == "symmetry":
                name = self.ident().text
                xi, eta = {}, {}
                self.expect("{")
                while not self.accept("}"):
                    head = self.tok
                    if head.text not in ("xi", "eta"):
                        raise self.error(f"unexpected {head.text!r}", ["xi", "eta", "}"])
                    self.advance()
                    self.expect("[")
                    var = self.ident()
                    self.expect("]")
                    self.expect("=")
                    value = self.expr()
                    self.expect(";")
                    if head.text == "xi":
                        if var.text not in self.space.independents:
                            raise SemanticError(f"unknown independent {var.text!r}", var.line, var.col)
                        xi[var.text] = value
                    else:
                        if var.text not in self.space.dependents:
                            raise SemanticError(f"unknown dependent {var.text!r}", var.line, var.col)
                        eta[var.text] = value
                model.symmetries[name] = Generator(xi, eta, name)
            elif t.text == "substitution":
                name = self.ident().text
                comps = {}
                self.expect("{")
                while not self.accept("}"):
                    head = self.tok
                    if head.text != "v":
                        raise self.error(f"unexpected {head.text!r}", ["v", "}"])
                    self.advance()
                    self.expect("[")
                    var = self.ident()
                    if var.text not in self.space.dependents:
                        raise SemanticError(f"unknown dependent {var.text!r}", var.line, var.col)
                    self.expect("]")
                    self.expect("=")
                    comps[var.text] = self.expr()
                    self.expect(";")
                model.substitutions[name] = Substitution(comps, name)
        if model is None:
            raise self.error("model declares no equations", ["equation"])
        model.options = opts
        return model

    def build_space(self, t: Token) -> JetSpace:
        d = self.decl
        if not d["independents"] or not d["dependents"]:
            raise SemanticError("independents and dependents must be declared first", t.line, t.col)
        try:
            self.space = JetSpace(tuple(d["independents"]), tuple(d["dependents"]),
                                  tuple(d["adjoint"]), dict(d["arbitrary"]))
        except JetError as exc:
            raise SemanticError(str(exc), t.line, t.col) from None
        return self.space

    # expressions
    def expr(self) -> Expr:
        e = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            r = self.term()
            e = e + r if op == "+" else e - r
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance()
            r = self.unary()
            if op.text == "*":
                e = e * r
            else:
                if r.is_zero():
                    raise SemanticError("zero denominator", op.line, op.col)
                e = e / r
        return e

    def unary(self) -> Expr:
        if self.accept("-"):
            return -self.unary()
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.accept("^"):
            return base ** self.exponent()
        return base

    def exponent(self) -> int:
        sign = -1 if self.accept("-") else 1
        if not sign == -1:
            self.accept("+")
        if self.accept("("):
            n = self.exponent()
            self.expect(")")
        else:
            tok = self.tok
            if tok.kind != "num" or not tok.text.isdigit():
                raise self.error("exponent must be an integer", ["integer"])
            self.advance()
            n = int(tok.text)
        n *= sign
        if self.accept("^"):
            m = self.exponent()
            if m < 0:
                raise self.error("non-integer exponent")
            n = n ** m
        return n

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            if not t.text.isdigit():
                raise ParseError("only integer literals are allowed in expressions", t.line, t.col)
            self.advance()
            return Expr.const(int(t.text))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident" and t.text == "D":
            self.advance()
            return self.derivative()
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.advance()
            return self.symbol(t)
        raise self.error(f"unexpected {t.text or 'end of input'!r}",
                         ["number", "identifier", "(", "D[...]", "-"])

    def derivative(self) -> Expr:
        self.expect("[")
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            head = None
        else:
            head = self.ident()
        vars_ = []
        while self.accept(","):
            v = self.ident()
            if v.text not in self.space.independents:
                raise SemanticError(f"unknown independent {v.text!r}", v.line, v.col)
            vars_.append(v.text)
        self.expect("]")
        if head is None:
            return total_derivative_multi(inner, tuple(vars_), self.space)
        name = head.text
        sp = self.space
        if name in sp.dependents:
            return Expr.atom(jet(name, *vars_))
        if name in sp.adjoints:
            return Expr.atom(jet(name, *vars_, adjoint=True))
        if name in sp.functions:
            args = sp.functions[name]
            bad = [v for v in vars_ if v not in args]
            if bad:
                return ZERO
            return Expr.atom(func(name, args, *vars_))
        raise SemanticError(f"unknown identifier {name!r}", head.line, head.col)

    def symbol(self, t: Token) -> Expr:
        if self.space is None:
            raise SemanticError("expression before declarations", t.line, t.col)
        name = t.text.rstrip("'")
        primes = len(t.text) - len(name)
        sp = self.space
        if primes:
            if name not in sp.functions:
                raise SemanticError(f"unknown identifier {name!r}", t.line, t.col)
            args = sp.functions[name]
            if len(args) != 1:
                raise SemanticError(f"use D[{name},...] for functions of several variables",
                                    t.line, t.col)
            return Expr.atom(func(name, args, *(args * primes)))
        if name in sp.independents:
            return Expr.atom(indep(name))
        if name in sp.dependents:
            return Expr.atom(jet(name))
        if name in sp.adjoints:
            return Expr.atom(jet(name, adjoint=True))
        if name in sp.functions:
            return Expr.atom(func(name, sp.functions[name]))
        raise SemanticError(f"unknown identifier {name!r}", t.line, t.col)


def parse_model(text: str) -> ModelFile:
    model = _Parser(tokenize(text)).model()
    opts = model.options
    if "max_order" in opts:
        model.space.max_order = int(opts["max_order"])
    return model


def format_model(model: ModelFile) -> str:
    sp = model.space
    lines = [f"independents {' '.join(sp.independents)}",
             f"dependents {' '.join(sp.dependents)}",
             f"adjoint {' '.join(sp.adjoints)}"]
    if sp.functions:
        lines.append("arbitrary " + " ".join(f"{n}({','.join(a)})" for n, a in sp.functions.items()))
    for k, v in model.options.items():
        lines.append(f"option {k} = {v}")
    for kw, eqs in (("equation", model.equations), ("constraint", model.constraints)):
        for eq in eqs:
            lead = f" lead {atom_text(eq.lead)}" if eq.lead is not None else ""
            lines.append(f"{kw} {eq.name}: {to_text(eq.expr)} = 0{lead}")
    for name, X in model.symmetries.items():
        lines.append(f"symmetry {name} {{")
        for var, e in X.xi.items():
            lines.append(f"  xi[{var}] = {to_text(e)};")
        for dep, e in X.eta.items():
            lines.append(f"  eta[{dep}] = {to_text(e)};")
        lines.append("}")
    for name, sub in model.substitutions.items():
        lines.append(f"substitution {name} {{")
        for dep, e in sub.components.items():
            lines.append(f"  v[{dep}] = {to_text(e)};")
        lines.append("}")
    return "\n".join(lines) + "\n"


def models_equal(a: ModelFile, b: ModelFile) -> bool:
    sa, sb = a.space, b.space
    if (sa.independents, sa.dependents, sa.adjoints, sa.functions) != \
            (sb.independents, sb.dependents, sb.adjoints, sb.functions):
        return False

    def eqs(m):
        return [(e.name, e.expr, e.lead) for e in m.equations], \
            [(e.name, e.expr, e.lead) for e in m.constraints]

    def gens(m):
        return {n: ({k: v for k, v in X.xi.items() if not v.is_zero()},
                    {k: v for k, v in X.eta.items() if not v.is_zero()})
                for n, X in m.symmetries.items()}

    def subs_(m):
        return {n: s.components for n, s in m.substitutions.items()}

    return (eqs(a) == eqs(b) and gens(a) == gens(b) and subs_(a) == subs_(b)
            and a.options == b.options)


def load_model(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
