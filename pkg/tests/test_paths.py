import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from qpreduce import paths as pa
from qpreduce import structures as sts


def coadjoint_generator(spec, a):
    # db_alpha/dt = -c^g_{alpha beta} a^beta b_g  ->  matrix M[alpha, g]
    c = spec.primal.bracket_values(np.zeros((1, spec.n)))[0]
    return -np.einsum("abg,b->ag", c, a)


def test_zero_anchor_keeps_base_point():
    s = pa.integrate_apath(sts.builtin("so3"), [0.4], lambda t: [1.0, 2.0, 3.0], 50)
    assert np.all(s.x == 0.4)


def test_tangent_line_is_linear():
    s = pa.integrate_apath(sts.builtin("tangent:R^1"), [0.3], lambda t: [1.0], 100)
    assert np.max(np.abs(s.x[:, 0] - (0.3 + s.t))) <= 1e-12


def test_constant_poisson_apath_closed_form():
    spec = sts.poisson_to_bialgebroid(sts.builtin("poisson:constant2d"))
    a = np.array([0.7, -0.2])
    x0 = np.array([0.1, 0.5])
    s = pa.integrate_apath(spec, x0, lambda t: a, 20)
    rho = spec.primal.anchor_values(x0[None])[0]
    assert np.max(np.abs(s.x - (x0 + s.t[:, None] * (rho @ a)))) <= 1e-14


def test_table_driver_is_interpolated():
    N = 40
    t = np.linspace(0, 1, N + 1)
    s = pa.integrate_apath(sts.builtin("tangent:R^1"), [0.0], t[:, None], N)
    # a(t) = t exactly representable by linear interpolation: x = t^2 / 2
    assert np.max(np.abs(s.x[:, 0] - t**2 / 2)) <= 1e-14


def test_cotangent_zero_structure_keeps_b():
    spec = sts.BialgebroidSpec.from_algebroid(sts.LieAlgebroidSpec.zero(2, 2))
    s = pa.integrate_cotangent_path(spec, [0, 0], [0.3, -0.1], lambda t: [1, 1], lambda t: [2, 2], 30)
    assert np.all(s.b == np.array([0.3, -0.1]))


def test_cotangent_so3_matches_matrix_exponential():
    spec = sts.builtin("so3")
    a = np.array([0.3, -0.7, 0.5])
    b0 = np.array([0.2, 0.1, -0.4])
    s = pa.integrate_cotangent_path(spec, [0.0], b0, lambda t: a, lambda t: [0.0], 200)
    assert np.max(np.abs(s.b[-1] - expm(coadjoint_generator(spec, a)) @ b0)) <= 1e-8


def test_cotangent_tangent_line_closed_form():
    s = pa.integrate_cotangent_path(sts.builtin("tangent:R^1"), [0.0], [0.5], lambda t: [1.0], lambda t: [1.0], 50)
    assert np.max(np.abs(s.b[:, 0] - (0.5 - s.t))) <= 1e-13


def test_blow_up_is_reported_with_partial_path():
    spec = sts.LieAlgebroidSpec.build(1, 1, {(0, 0): "x1^2"})
    with pytest.raises(pa.BlowUpError) as info:
        pa.integrate_apath(spec, [1.0], lambda t: [10.0], 100, box=1e6)
    assert info.value.partial is not None
    assert np.all(np.isfinite(info.value.partial.x))


def _so3star_problem():
    spec = sts.poisson_to_bialgebroid(sts.builtin("poisson:so3star"))
    a = lambda t: np.array([np.cos(t), np.sin(2 * t), 0.5])  # noqa: E731
    p = lambda t: np.array([t, 1 - t, 0.3])  # noqa: E731
    return spec, [0.2, -0.1, 0.4], [0.1, 0.2, 0.3], a, p


@pytest.fixture(scope="module")
def so3star_reference():
    spec, x0, b0, a, p = _so3star_problem()
    return pa.integrate_cotangent_path(spec, x0, b0, a, p, 10_000)


def test_fourth_order_against_reference(so3star_reference):
    spec, x0, b0, a, p = _so3star_problem()
    ref = so3star_reference
    errs = []
    for N in (10, 20, 40):
        s = pa.integrate_cotangent_path(spec, x0, b0, a, p, N)
        errs.append(max(np.max(np.abs(s.x[-1] - ref.x[-1])), np.max(np.abs(s.b[-1] - ref.b[-1]))))
        base = pa.integrate_apath(spec, x0, a, N)
        assert np.max(np.abs(base.x[-1] - ref.x[-1])) <= errs[-1] + 1e-15
    assert errs[0] / errs[1] >= 8 and errs[1] / errs[2] >= 8


def test_midpoint_defect_is_fourth_order():
    spec, x0, b0, a, p = _so3star_problem()
    d = [pa.integrate_cotangent_path(spec, x0, b0, a, p, N).defect.max() for N in (10, 20, 40)]
    assert d[0] / d[1] >= 8 and d[1] / d[2] >= 8


def test_projection_consistency():
    spec, x0, b0, a, p = _so3star_problem()
    lifted = pa.integrate_cotangent_path(spec, x0, b0, a, p, 64)
    base = pa.integrate_apath(spec, x0, a, 64)
    assert np.max(np.abs(lifted.x - base.x)) <= 1e-12
    assert np.array_equal(lifted.a, base.a)


def test_constraints_vanish_on_zero_fields():
    spec = sts.builtin("so3")
    t = np.linspace(0, 1, 11)
    z1, z3 = np.zeros((11, 1)), np.zeros((11, 3))
    assert pa.coisotropic_residual(spec, t, z1, z3, z3, z1).max_residual == 0.0


def test_cotangent_paths_satisfy_constraints_at_second_order():
    spec, x0, b0, a, p = _so3star_problem()
    res = []
    for N in (50, 100, 200):
        s = pa.integrate_cotangent_path(spec, x0, b0, a, p, N)
        res.append(pa.coisotropic_residual(spec, s.t, *pa.to_constraint_fields(s)).max_residual)
    assert res[0] / res[1] >= 3.5 and res[1] / res[2] >= 3.5


def test_unoriented_fields_violate_constraints():
    # without the orientation map the same path is not on the constraint surface
    spec, x0, b0, a, p = _so3star_problem()
    s = pa.integrate_cotangent_path(spec, x0, b0, a, p, 100)
    assert pa.coisotropic_residual(spec, s.t, s.x, s.a, s.b, s.p).max_residual > 0.1


def test_random_fields_violate_constraints():
    rng = np.random.default_rng(0)
    spec = sts.poisson_to_bialgebroid(sts.builtin("poisson:x1-rotation"))
    t = np.linspace(0, 1, 21)
    fields = [rng.normal(size=(21, 2)) for _ in range(4)]
    assert pa.coisotropic_residual(spec, t, *fields).max_residual > 0.1


def test_boundary_layers_reported_separately():
    spec = sts.builtin("so3")
    t = np.linspace(0, 1, 5)
    z1, z3 = np.zeros((5, 1)), np.zeros((5, 3))
    A = np.zeros((5, 3))
    A[-1, 0] = 0.25
    rep = pa.coisotropic_residual(spec, t, z1, z3, z3, z1, A=A, P=np.zeros((5, 1)))
    assert rep.boundary == {"A": 0.25, "P": 0.0}
    assert rep.max_residual == 0.0


def test_grid_mismatch():
    spec = sts.builtin("so3")
    with pytest.raises(ValueError):
        pa.coisotropic_residual(spec, np.linspace(0, 1, 5), np.zeros((4, 1)), np.zeros((5, 3)), np.zeros((5, 3)), np.zeros((5, 1)))


def test_csv_round_trip(tmp_path):
    spec, x0, b0, a, p = _so3star_problem()
    s = pa.integrate_cotangent_path(spec, x0, b0, a, p, 12)
    pa.write_csv(s, tmp_path / "path.csv")
    back = pa.read_csv(tmp_path / "path.csv")
    for name in ("t", "x", "a", "b", "p"):
        assert np.array_equal(getattr(back, name), getattr(s, name))
    assert (tmp_path / "path.csv").read_text().splitlines()[0] == "t,x1,x2,x3,a1,a2,a3,b1,b2,b3,p1,p2,p3"


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_coadjoint_flow_preserves_norm(a1, a2, a3):
    # so(3) coadjoint orbits are spheres
    spec = sts.builtin("so3")
    b0 = np.array([0.3, -0.2, 0.6])
    s = pa.integrate_cotangent_path(spec, [0.0], b0, lambda t: [a1, a2, a3], lambda t: [0.0], 40)
    assert np.max(np.abs(np.linalg.norm(s.b, axis=1) - np.linalg.norm(b0))) <= 1e-7
