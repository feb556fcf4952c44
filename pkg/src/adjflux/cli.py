"""Command-line entry point.

Exit codes: 0 success, 1 mathematical failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .adjoint import (AdjointError, AnsatzSpec, adjoint_system, check_substitution,
                      find_substitution, multiplier_form, strict_substitution)
from .conslaw import ConservationError, conserved_vector, strip_trivial, verify
from .dsl import DslError, ModelFile, load_model
from .exprcore import to_text
from .jetcalc import JetError, check_symmetry
from .manifold import reduce, solve_for_leading
from .system import InvalidSystem

MODELS_DIR = Path(__file__).parent / "models"

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def resolve_model(name: str) -> Path:
    """A path on disk, or the name of a shipped model (with or without .model)."""
    p = Path(name)
    if p.is_file():
        return p
    for cand in (MODELS_DIR / name, MODELS_DIR / f"{name}.model"):
        if cand.is_file():
            return cand
    raise UsageError(f"model not found: {name}")


def _seed(args, model: ModelFile) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ADJFLUX_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"ADJFLUX_SEED must be an integer, got {env!r}") from None
    return int(model.options.get("seed", 0))


def _tol(args, model: ModelFile) -> float:
    if args.tol is not None:
        return args.tol
    return float(model.options.get("tol", 1e-9))


def _load(args) -> ModelFile:
    model = load_model(resolve_model(args.model))
    if args.max_order is not None:
        if args.max_order < 1:
            raise UsageError("--max-order must be positive")
        model.space.max_order = args.max_order
    return model


def cmd_adjoint(args, model, out) -> int:
    sys_ = model.system()
    adj = adjoint_system(sys_)
    out.append(f"lagrangian: {to_text(adj.lagrangian)}")
    for name, e in adj.equations:
        out.append(f"adjoint[{name}]: {to_text(e)} = 0")
    return OK


def _report_lines(model, sub, rep) -> list:
    sp = model.space
    lines = [f"substitution: {sub.name} ({rep.kind})"]
    lines += [f"v[{d}] = {to_text(sub.phi(d))}" for d in sp.dependents]
    lines.append(f"verdict: {'self-adjoint' if rep.verdict else 'not self-adjoint'}")
    names = [eq.name for eq in model.equations]
    for a, row in enumerate(rep.lam):
        for b, val in enumerate(row):
            lines.append(f"lambda[{names[a]}][{names[b]}]: {to_text(val)}")
    for (a, b, K), q in sorted(rep.prolonged.items()):
        lines.append(f"lambda[{names[a]}][D[{names[b]},{','.join(K)}]]: {to_text(q)}")
    for a, r in enumerate(rep.residual):
        lines.append(f"residual[{names[a]}]: {to_text(r)}")
    return lines


def cmd_check(args, model, out) -> int:
    sub = model.substitution(args.sub)
    rep = check_substitution(model.system(), sub)
    out += _report_lines(model, sub, rep)
    return OK if rep.verdict else FAIL


def cmd_find(args, model, out) -> int:
    try:
        ansatz = AnsatzSpec.parse(args.ansatz)
        ansatz.check()
    except (AdjointError, ValueError) as exc:
        raise UsageError(f"bad --ansatz: {exc}") from None
    sub = find_substitution(model.system(), ansatz)
    if sub is None:
        out.append("none")
        return FAIL
    out += [f"v[{d}] = {to_text(sub.phi(d))}" for d in model.space.dependents]
    return OK


def cmd_multiplier(args, model, out) -> int:
    sub = model.substitution(args.sub)
    sys_ = model.system()
    rep = check_substitution(sys_, sub)
    if not rep.verdict:
        out += _report_lines(model, sub, rep)
        return FAIL
    mf = multiplier_form(sys_, sub)
    eq = mf.equations[0]
    out.append(f"multiplier: {to_text(mf.multiplier)}")
    out.append(f"equation {eq.name}: {to_text(eq.expr)} = 0")
    strict = check_substitution(mf, strict_substitution(mf.space))
    out.append(f"strict: {'yes' if strict.verdict else 'no'}")
    return OK if strict.verdict else FAIL


def cmd_conslaw(args, model, out) -> int:
    sys_ = model.system()
    cv = conserved_vector(sys_, model.symmetry(args.sym), model.substitution(args.sub),
                          force=args.unchecked)
    if args.strip:
        cv = strip_trivial(cv)
    out += cv.text()
    if not args.verify:
        return OK
    rep = verify(cv, seed=_seed(args, model), n_points=args.points, tol=_tol(args, model),
                 n_realizations=args.realizations)
    out += rep.lines()
    return OK if rep.passed else FAIL


def cmd_symmetry(args, model, out) -> int:
    rep = check_symmetry(model.system(), model.symmetry(args.sym))
    out.append(f"verdict: {'symmetry' if rep.ok else 'not a symmetry'}")
    for name, r in rep.residuals.items():
        out.append(f"residual[{name}]: {to_text(r)}")
    return OK if rep.ok else FAIL


def cmd_reduce(args, model, out) -> int:
    sys_ = model.system()
    e = model.parse_expr(args.expr)
    nf, cert = reduce(e, solve_for_leading(sys_))
    out.append(f"normal_form: {to_text(nf)}")
    for (name, K), q in sorted(cert.items()):
        label = f"D[{name},{','.join(K)}]" if K else name
        out.append(f"certificate[{label}]: {to_text(q)}")
    return OK


def build_parser() -> argparse.ArgumentParser:
    def flags(default):
        p = argparse.ArgumentParser(add_help=False)
        p.add_argument("--seed", type=int, default=default,
                       help="numeric seed (fallback: ADJFLUX_SEED, then 0)")
        p.add_argument("--tol", type=float, default=default, help="numeric tolerance (default 1e-9)")
        p.add_argument("--max-order", type=int, default=default, help="jet order cap (default 10)")
        return p

    # flags may appear before or after the subcommand; the subcommand copy
    # must not overwrite a value given up front
    top, common = flags(None), flags(argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="adjflux", parents=[top],
                                     description="Adjoint systems, self-adjointness and conservation laws.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adjoint", parents=[common], help="formal Lagrangian and adjoint system")
    p.add_argument("model")
    p.set_defaults(func=cmd_adjoint)

    sa = sub.add_parser("selfadjoint", help="self-adjointness checks and searches")
    sa_sub = sa.add_subparsers(dest="action", required=True)
    p = sa_sub.add_parser("check", parents=[common], help="test a named substitution")
    p.add_argument("model")
    p.add_argument("--sub", required=True)
    p.set_defaults(func=cmd_check)
    p = sa_sub.add_parser("find", parents=[common], help="search a substitution template")
    p.add_argument("model")
    p.add_argument("--ansatz", required=True, help="power[:N] | affine:<deg> | const")
    p.set_defaults(func=cmd_find)

    p = sub.add_parser("multiplier", parents=[common], help="strictly self-adjoint multiplier form")
    p.add_argument("model")
    p.add_argument("--sub", required=True)
    p.set_defaults(func=cmd_multiplier)

    p = sub.add_parser("conslaw", parents=[common], help="conserved vector of a symmetry")
    p.add_argument("model")
    p.add_argument("--sym", required=True)
    p.add_argument("--sub", required=True)
    p.add_argument("--strip", action="store_true", help="remove trivial parts")
    p.add_argument("--verify", action="store_true", help="symbolic and numeric divergence check")
    p.add_argument("--unchecked", action="store_true",
                   help="skip the self-adjointness check of the substitution")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--realizations", type=int, default=1,
                   help="random polynomial choices of the arbitrary functions")
    p.set_defaults(func=cmd_conslaw)

    p = sub.add_parser("symmetry", parents=[common], help="check a named symmetry")
    p.add_argument("model")
    p.add_argument("--sym", required=True)
    p.set_defaults(func=cmd_symmetry)

    p = sub.add_parser("reduce", parents=[common], help="normal form on the solution manifold")
    p.add_argument("model")
    p.add_argument("--expr", required=True)
    p.set_defaults(func=cmd_reduce)
    return parser


def run(argv=None) -> tuple[int, str, str]:
    """Run a command; returns (exit code, stdout text, stderr text)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (exc.code if isinstance(exc.code, int) else USAGE), "", ""
    out: list = []
    try:
        model = _load(args)
        code = args.func(args, model, out)
    except (UsageError, DslError, InvalidSystem, OSError) as exc:
        return USAGE, "", f"adjflux: {exc}\n"
    except (AdjointError, ConservationError, JetError) as exc:
        text = "\n".join(out) + "\n" if out else ""
        return FAIL, text, f"adjflux: {exc}\n"
    return code, "\n".join(out) + "\n", ""


def main(argv=None) -> int:
    code, stdout, stderr = run(argv)
    sys.stdout.write(stdout)
    sys.stderr.write(stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
