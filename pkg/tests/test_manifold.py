import numpy as np
import pytest
from hypothesis import given, settings

from adjflux.exprcore import Expr, eval_numeric, jet
from adjflux.jetcalc import JetSpace, multi_indices, total_derivative, total_derivative_multi
from adjflux.manifold import (ReductionError, certificate_residual, numeric_residual,
                              random_realizations, reduce, sample_point, solve_for_leading)
from adjflux.system import DiffSystem, Equation, InvalidSystem

from _helpers import model, polynomials

KP = model("kp")
KP_SYS = KP.system()
KP_RANK = solve_for_leading(KP_SYS)
sp_ = KP.space
u, w = sp_.u("u"), sp_.u("w")
ut, ux, uy, uxxx, wx, wy = (sp_.u(n, *d) for n, d in (
    ("u", ("t",)), ("u", ("x",)), ("u", ("y",)), ("u", ("x", "x", "x")), ("w", ("x",)), ("w", ("y",))))

KP_ATOMS = [jet("u", *J) for J in multi_indices(("t", "x", "y"), 2)] + \
    [jet("w", *J) for J in multi_indices(("t", "x", "y"), 2)]


def test_kp_rules():
    r1, r2 = KP_RANK.rules
    assert r1.lead == jet("u", "t") and r1.rhs == u * ux + uxxx + wy
    assert r2.lead == jet("w", "x") and r2.rhs == uy


def test_heat_rule():
    S = JetSpace(("t", "x", "y"), ("u",))
    lap = S.u("u", "x", "x") + S.u("u", "y", "y")
    rank = solve_for_leading(DiffSystem(S, [Equation("F", S.u("u", "t") - lap)]))
    assert rank.rules[0].rhs == lap


def test_equation_reduces_to_zero():
    for eq in KP_SYS.equations:
        nf, cert = reduce(eq.expr, KP_RANK)
        assert nf.is_zero()
        assert cert == {(eq.name, ()): Expr.const(1)}


def test_one_rewrite_step():
    nf, cert = reduce(ut - u * ux, KP_RANK)
    assert nf == uxxx + wy
    assert cert == {("F1", ()): Expr.const(1)}


def test_prolonged_rule():
    nf, cert = reduce(sp_.u("w", "x", "x"), KP_RANK)
    assert nf == sp_.u("u", "x", "y")
    assert cert == {("F2", ("x",)): Expr.const(1)}


def test_kp_xf_divergence_certificate():
    from adjflux.conslaw import conserved_vector, strip_trivial
    cv = strip_trivial(conserved_vector(KP_SYS, KP.symmetry("Xf"), KP.substitution("uu")))
    nf, cert = reduce(cv.divergence(), KP_RANK)
    f1, f2, f3, f4 = (sp_.f("f", *("t",) * k) for k in range(1, 5))
    x, y = sp_.x("x"), sp_.x("y")
    assert nf.is_zero()
    assert cert[("F1", ())] == -(u * f1 + x * f2 + y ** 2 * f3 / 2)
    assert cert[("F2", ())] == -(w * f1 + x * y * f3 + y ** 3 * f4 / 6)
    assert certificate_residual(cv.divergence(), nf, cert, KP_RANK).is_zero()


def test_lead_must_enter_affinely():
    S = JetSpace(("t", "x"), ("u",))
    sys_ = DiffSystem(S, [Equation("F", S.u("u", "t") ** 2 - S.u("u", "x", "x"), jet("u", "t"))])
    with pytest.raises(ReductionError):
        solve_for_leading(sys_)


def test_rhs_may_not_contain_prolonged_lead():
    S = JetSpace(("t", "x"), ("u",))
    sys_ = DiffSystem(S, [Equation("F", S.u("u", "x") - S.u("u", "x", "x"), jet("u", "x"))])
    with pytest.raises(ReductionError):
        solve_for_leading(sys_)


def test_lead_must_appear():
    S = JetSpace(("t", "x"), ("u",))
    with pytest.raises(InvalidSystem):
        DiffSystem(S, [Equation("F", S.u("u", "x"), jet("u", "t"))])


def test_duplicate_leads_rejected():
    S = JetSpace(("t", "x"), ("u", "w"))
    eqs = [Equation("A", S.u("u", "t") - S.u("w", "x"), jet("u", "t")),
           Equation("B", S.u("u", "t") - S.u("w", "t"), jet("u", "t"))]
    with pytest.raises(InvalidSystem):
        DiffSystem(S, eqs)


def test_sampled_points_lie_on_the_manifold():
    rng = np.random.default_rng(3)
    funcs = random_realizations(sp_, KP_RANK, rng)
    exprs = [total_derivative_multi(eq.expr, J, sp_) for eq in KP_SYS.equations
             for J in multi_indices(("t", "x", "y"), 2)]
    for _ in range(20):
        point = sample_point(exprs, KP_RANK, rng, funcs)
        for e in exprs:
            val, scale = eval_numeric(e, point, funcs, with_scale=True)
            assert abs(val) <= 1e-12 * max(scale, 1.0)


def test_numeric_residual_detects_nonzero():
    assert numeric_residual(ut, KP_RANK, n_points=10) > 1e-3
    assert numeric_residual(ut - u * ux - uxxx - wy, KP_RANK, n_points=10) < 1e-12


def test_numeric_residual_is_seeded():
    e = ut * ux + total_derivative(wx, "y", sp_)
    assert numeric_residual(e, KP_RANK, 10, seed=5) == numeric_residual(e, KP_RANK, 10, seed=5)


PROPS = settings(max_examples=500, deadline=None, derandomize=True)


@PROPS
@given(polynomials(atoms=KP_ATOMS))
def test_reduction_soundness_and_idempotence(e):
    nf, cert = reduce(e, KP_RANK)
    assert certificate_residual(e, nf, cert, KP_RANK).is_zero()
    assert not any(KP_RANK.reducible(a) for a in nf.atoms())
    again, cert2 = reduce(nf, KP_RANK)
    assert again == nf and cert2 == {}
    assert reduce(e, KP_RANK, certificate=False)[0] == nf


@settings(max_examples=100, deadline=None, derandomize=True)
@given(polynomials(atoms=KP_ATOMS))
def test_normal_form_agrees_numerically(e):
    nf, _ = reduce(e, KP_RANK)
    assert numeric_residual(e - nf, KP_RANK, n_points=3) <= 1e-9
