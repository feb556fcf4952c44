"""Exact sparse linear algebra over the rationals."""

from __future__ import annotations

from fractions import Fraction


def _rref(rows: list, cols: list) -> tuple[list, list]:
    """Reduced row echelon form of sparse rows {col: value}; returns (rows, pivots)."""
    work = [{c: Fraction(v) for c, v in r.items() if v} for r in rows]
    work = [r for r in work if r]
    pivots: list = []
    done: list = []
    for col in cols:
        idx = next((i for i, r in enumerate(work) if col in r), None)
        if idx is None:
            continue
        row = work.pop(idx)
        inv = 1 / row[col]
        row = {c: v * inv for c, v in row.items()}
        for group in (work, done):
            for i, r in enumerate(group):
                f = r.get(col)
                if f:
                    new = dict(r)
                    for c, v in row.items():
                        n = new.get(c, 0) - f * v
                        if n:
                            new[c] = n
                        else:
                            new.pop(c, None)
                    group[i] = new
        work = [r for r in work if r]
        done.append(row)
        pivots.append(col)
    return done, pivots


def nullspace(rows: list, cols: list) -> list:
    """Basis of {x : rows . x = 0}; one vector per free column, in column order."""
    done, pivots = _rref(rows, cols)
    pset = set(pivots)
    basis = []
    for free in cols:
        if free in pset:
            continue
        vec = {free: Fraction(1)}
        for row, p in zip(done, pivots):
            if free in row:
                vec[p] = -row[free]
        basis.append(vec)
    return basis


def solve(rows: list, rhs: list, cols: list) -> dict | None:
    """A particular solution of rows . x = rhs (free columns set to 0), or None."""
    key = object()
    aug = []
    for r, b in zip(rows, rhs):
        row = dict(r)
        if b:
            row[key] = Fraction(b)
        aug.append(row)
    done, pivots = _rref(aug, list(cols) + [key])
    if key in pivots:
        return None
    return {p: row.get(key, Fraction(0)) for row, p in zip(done, pivots)}
