import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from qpreduce import expr as ex
from qpreduce import graded as gr
from qpreduce import structures as sts
from qpreduce.graded import GradedPolynomial as P

from strategies import bracket_identity_residuals, graded_monomial


def gen(n, r, kind, i):
    return P.generator(n, r, kind, i)


def const_value(poly, n=1):
    """Value of a degree-0 polynomial that should be a constant."""
    assert set(poly.terms) <= {()}
    if not poly.terms:
        return 0.0
    return float(poly.terms[()].evaluate(np.zeros((1, n)))[0])


# products ---------------------------------------------------------------------


def test_odd_square_vanishes():
    a1 = gen(1, 2, "a", 0)
    assert (a1 * a1).is_zero()


def test_koszul_sign_of_odd_pair():
    a1, b1 = gen(1, 1, "a", 0), gen(1, 1, "b", 0)
    assert (b1 * a1 + a1 * b1).is_zero()
    assert const_value(P.function(1, 1, 1.0)) == 1.0


def test_coefficients_multiply():
    n, r = 2, 2
    f = P.monomial(n, r, ex.parse("x1", 2), [("a", 0)])
    g = P.monomial(n, r, ex.parse("x2", 2), [("a", 1)])
    prod = f * g
    c = prod.coefficient([("a", 0), ("a", 1)])
    assert c.evaluate([[2.0, 3.0]])[0] == 6.0


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        gen(1, 1, "a", 0) * gen(2, 1, "a", 0)


# canonical bracket --------------------------------------------------------------


def test_elementary_pairings():
    n, r = 2, 2
    x1, x2 = gen(n, r, "x", 0), gen(n, r, "x", 1)
    p1 = gen(n, r, "p", 0)
    assert const_value(gr.canonical_bracket(x1, p1), n) == 1.0
    assert const_value(gr.canonical_bracket(p1, x1), n) == -1.0
    assert gr.canonical_bracket(x1, x2).is_zero()
    a1, b1 = gen(n, r, "a", 0), gen(n, r, "b", 0)
    assert const_value(gr.canonical_bracket(b1, a1), n) == 1.0
    assert const_value(gr.canonical_bracket(a1, b1), n) == 1.0


def test_bracket_degree_drops_by_two():
    rng = np.random.default_rng(3)
    from strategies import random_monomial

    for _ in range(50):
        f, g = random_monomial(rng, 2, 2), random_monomial(rng, 2, 2)
        h = gr.canonical_bracket(f, g)
        if not h.is_zero():
            assert h.degree() == f.degree() + g.degree() - 2


@settings(max_examples=150, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.data())
def test_bracket_identities_property(data):
    n = data.draw(st.integers(1, 3))
    r = data.draw(st.integers(1, 3))
    f, g, h = (data.draw(graded_monomial(n, r)) for _ in range(3))
    anti, leib, jac = bracket_identity_residuals(f, g, h)
    assert anti.is_zero()
    assert leib.is_zero()
    assert jac.is_zero()


@settings(max_examples=100, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.data())
def test_graded_commutativity_property(data):
    n = data.draw(st.integers(1, 3))
    r = data.draw(st.integers(1, 3))
    f, g = (data.draw(graded_monomial(n, r)) for _ in range(2))
    sign = (-1) ** (f.degree() * g.degree())
    assert (f * g - (g * f).scale(sign)).is_zero()


# theta and the master equation ----------------------------------------------------


def test_zero_spec_gives_zero_theta():
    spec = sts.BialgebroidSpec.from_algebroid(sts.LieAlgebroidSpec.zero(2, 2))
    assert gr.theta_from_spec(spec).is_zero()
    assert gr.cme_residual(gr.theta_from_spec(spec), np.zeros((3, 2))).max_residual == 0.0


def test_so3_theta_is_half_c_aab():
    theta = gr.theta_from_spec(sts.builtin("so3"))
    assert theta.degree() == 3
    # 1/2 eps^g_ab a^a a^b b_g = a1 a2 b3 + a2 a3 b1 + a3 a1 b2
    pt = np.zeros((1, 1))
    assert theta.coefficient([("a", 0), ("a", 1), ("b", 2)]).evaluate(pt)[0] == 1.0
    assert theta.coefficient([("a", 1), ("a", 2), ("b", 0)]).evaluate(pt)[0] == 1.0
    assert theta.coefficient([("a", 0), ("a", 2), ("b", 1)]).evaluate(pt)[0] == -1.0
    assert len(theta.terms) == 3


def test_tangent_line_theta():
    theta = gr.theta_from_spec(sts.builtin("tangent:R^1"))
    assert list(theta.terms) == [(0, 2)]  # a1 p1
    assert theta.terms[(0, 2)].evaluate(np.zeros((1, 1)))[0] == 1.0


def test_so3_master_equation():
    theta = gr.theta_from_spec(sts.builtin("so3"))
    assert gr.canonical_bracket(theta, theta).is_zero()


def test_x1_rotation_cotangent_master_equation():
    spec = sts.poisson_to_bialgebroid(sts.builtin("poisson:x1-rotation"))
    pts = np.random.default_rng(0).uniform(-1, 1, (100, 2))
    assert gr.cme_residual(gr.theta_from_spec(spec), pts).max_residual <= 1e-12


def test_off_diagonal_so3_perturbation_is_first_order():
    eps = 1e-3
    spec = sts.builtin("so3")
    bad = sts.BialgebroidSpec(spec.primal.perturbed("bracket", (0, 1, 0), eps), spec.dual)
    res = gr.cme_residual(gr.theta_from_spec(bad), np.zeros((1, 1))).max_residual
    assert eps / 10 <= res <= 10 * eps


def test_diagonal_so3_perturbation_keeps_jacobi():
    # [e1,e2] = (1+eps) e3 is still a Lie bracket: any three-dimensional
    # bracket whose structure matrix is symmetric satisfies Jacobi.
    spec = sts.builtin("so3")
    bad = sts.BialgebroidSpec(spec.primal.perturbed("bracket", (0, 1, 2), 1e-3), spec.dual)
    assert gr.cme_residual(gr.theta_from_spec(bad), np.zeros((1, 1))).max_residual == 0.0


# ga grading --------------------------------------------------------------------


def test_bialgebroid_theta_lifts_to_ga_zero_and_one():
    spec = sts.poisson_to_bialgebroid(sts.builtin("poisson:so3star"))
    parts = gr.lifted_ga_components(gr.theta_from_spec(spec))
    assert set(parts) == {0, 1}
    total = parts[0] + parts[1]
    assert (total - gr.theta_from_spec(spec)).is_zero()


def test_proto_term_adds_ga_two():
    spec = sts.with_proto(sts.builtin("so3"), h={(0, 1, 2): 1.0})
    parts = gr.lifted_ga_components(gr.theta_from_spec(spec))
    assert 2 in parts and not parts[2].is_zero()


def test_constant_is_ga_zero():
    parts = gr.ga_decompose(P.function(1, 1, 1.0), gr.REDUCTION_GA)
    assert list(parts) == [0]


def test_ga_assignment_must_cover_all_kinds():
    with pytest.raises(ValueError):
        gr.ga_decompose(P.function(1, 1, 1.0), {"a": 1})


# derived brackets ------------------------------------------------------------------


def test_pairing_of_dual_frames():
    a1, b1 = gen(1, 1, "a", 0), gen(1, 1, "b", 0)
    assert const_value(gr.derived_pairing(a1, b1)) == 1.0


def test_dorfman_reproduces_so3_bracket():
    theta = gr.theta_from_spec(sts.builtin("so3"))
    e = [-gen(1, 3, "b", k) for k in range(3)]  # frame sections of A
    out = gr.dorfman(e[0], e[1], theta)
    assert (out - e[2]).is_zero()
    out = gr.dorfman(e[1], e[2], theta)
    assert (out - e[0]).is_zero()


def test_anchor_of_tangent_frame():
    theta = gr.theta_from_spec(sts.builtin("tangent:R^1"))
    e = -gen(1, 1, "b", 0)
    x1 = gen(1, 1, "x", 0)
    assert const_value(gr.derived_anchor(e, x1, theta)) == 1.0
    # a^1 is a section of the dual side, whose anchor is zero here
    assert gr.derived_anchor(gen(1, 1, "a", 0), x1, theta).is_zero()


def test_derived_brackets_reject_wrong_degree():
    theta = gr.theta_from_spec(sts.builtin("so3"))
    with pytest.raises(ValueError):
        gr.dorfman(gen(1, 3, "p", 0), gen(1, 3, "a", 0), theta)


def _random_section(rng, n, r):
    s = P.zero(n, r)
    for kind in "ab":
        for k in range(r):
            text = f"{rng.integers(-2, 3)} + {rng.integers(-2, 3)}*x{rng.integers(1, n + 1)}"
            s = s + P.monomial(n, r, ex.parse(text, n), [(kind, k)])
    return s


def test_courant_axioms_for_cotangent_double():
    rng = np.random.default_rng(5)
    spec = sts.poisson_to_bialgebroid(sts.builtin("poisson:x1-rotation"))
    theta = gr.theta_from_spec(spec)
    triples = [tuple(_random_section(rng, 2, 2) for _ in range(3)) for _ in range(4)]
    funcs = [P.function(2, 2, ex.parse("x1*x2 + sin(x2)", 2))]
    pts = rng.uniform(-1, 1, (20, 2))
    rep = gr.courant_axiom_residuals(theta, triples, funcs, pts)
    assert rep.max_residual <= 1e-10


def test_courant_zero_theta():
    rng = np.random.default_rng(1)
    theta = P.zero(1, 2)
    triples = [tuple(_random_section(rng, 1, 2) for _ in range(3))]
    rep = gr.courant_axiom_residuals(theta, triples, [P.function(1, 2, 1.0)], np.zeros((2, 1)))
    assert rep.max_residual == 0.0
