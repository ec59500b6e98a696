import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from feynman_dirichlet import (
    BoundaryConditionViolated,
    CollarTooWide,
    Disc,
    EllipticOperator,
    Frame,
    FrameNotOrthonormal,
    Grid,
    Interval,
    NormalPointsOutward,
    OutsideChart,
    OutsideCollar,
    SqueezeMap1D,
    TestFunction,
    boundary_charts,
    boundary_identity_residual,
    build_adapted_chart,
    build_dl_member,
    build_extension,
    chart_frame,
    extend_halfline,
    global_extend,
    local_extend,
    oblique_direction,
    squeeze_eval,
    transformed_coefficients,
)
from feynman_dirichlet.geometry import smoothstep

DISC = Disc((0.0, 0.0), 1.0)
R2 = np.sqrt(0.5)


def cubic_decay():
    # u = x^3 e^{-x}
    e = lambda x: np.exp(-x[:, 0])  # noqa: E731
    x0 = lambda x: x[:, 0]  # noqa: E731
    return TestFunction(
        1,
        lambda x: x0(x) ** 3 * e(x),
        lambda x: ((3 * x0(x) ** 2 - x0(x) ** 3) * e(x))[:, None],
        lambda x: ((6 * x0(x) - 6 * x0(x) ** 2 + x0(x) ** 3) * e(x))[:, None, None],
    )


# ---------------------------------------------------------------------------
# squeeze map and half-line


def test_squeeze_examples():
    assert squeeze_eval(SqueezeMap1D(1.0, 0.0, 0.5), -0.1) == pytest.approx(0.1)
    assert squeeze_eval(SqueezeMap1D(1.0, 2.0, 0.3), -0.1) == pytest.approx(0.12)


def test_squeeze_collar_stays_before_root():
    smap = SqueezeMap1D.for_coefficients(1.0, -2.0)
    # -x - 2 x^2 vanishes at x = -1/2
    assert smap.epsilon < 0.5
    xs = np.linspace(-smap.epsilon, 0, 200)[1:-1]
    assert np.all(smap(xs) > 0)
    with pytest.raises(CollarTooWide):
        SqueezeMap1D(1.0, -2.0, 0.6)
    with pytest.raises(OutsideCollar):
        smap(-0.49)


@given(st.floats(0.2, 5.0), st.floats(-5.0, 5.0))
def test_squeeze_positive_on_collar(a, b):
    smap = SqueezeMap1D.for_coefficients(a, b)
    xs = np.linspace(-smap.epsilon, 0, 101)[1:-1]
    assert np.all(smap(xs) > 0)


def test_halfline_cubic_decay():
    ext = extend_halfline(cubic_decay(), 1.0, 0.0)
    assert ext.raw(-0.5) == pytest.approx(-0.07581633246407918, rel=1e-12)
    assert ext(0.7) == pytest.approx(0.7**3 * np.exp(-0.7))
    assert ext(-ext.squeeze.epsilon) == 0.0


def test_halfline_zero():
    ext = extend_halfline(TestFunction.zero(1), 2.0, 1.0)
    assert np.all(ext(np.linspace(-0.3, 1, 20)) == 0)


def test_halfline_rejects_non_member():
    sinx_x = TestFunction.sine_series([1.0]) * TestFunction.polynomial({(1,): 1.0})
    with pytest.raises(BoundaryConditionViolated) as info:
        extend_halfline(sinx_x, 1.0, 1.0)
    assert info.value.residuals == {"Lu(0)": pytest.approx(2.0)}


def test_halfline_c2_matching():
    # a u'' + b u' = 0 at 0 with u = x - x^2 + x^3 and a = 1, b = 2
    u = TestFunction.polynomial({(1,): 1.0, (2,): -1.0, (3,): 1.0})
    ext = extend_halfline(u, 1.0, 2.0)
    h = 1e-4
    f = lambda x: ext.raw(np.asarray(x, dtype=float))  # noqa: E731
    d1_out = (3 * f(0) - 4 * f(-h) + f(-2 * h)) / (2 * h)
    d2_out = (2 * f(0) - 5 * f(-h) + 4 * f(-2 * h) - f(-3 * h)) / h**2
    assert d1_out == pytest.approx(1.0, abs=1e-6)
    assert d2_out == pytest.approx(-2.0, abs=1e-5)


# ---------------------------------------------------------------------------
# frames, transformed coefficients, oblique direction


def _radial_frame_oracle(x, h=1e-6):
    """Inward normal -x/|x|, tangent, and d_{v_1} v_n by central differences."""
    vn = lambda p: -p / np.linalg.norm(p)  # noqa: E731
    n = vn(x)
    t = np.array([-n[1], n[0]])
    dvn = (vn(x + h * t) - vn(x - h * t)) / (2 * h)
    return t, n, dvn


@pytest.mark.parametrize("angle", [0.0, 0.4, 2.0])
def test_btilde_on_unit_circle(angle):
    x = np.array([np.cos(angle), np.sin(angle)])
    t, n, dvn = _radial_frame_oracle(x)
    # A = I: b_tilde = <v_1, d_{v_1} v_n> + <v_n, d_{v_n} v_n>, the latter vanishes on rays
    oracle = t @ dvn
    assert oracle == pytest.approx(-1.0, abs=1e-8)
    chart = boundary_charts(DISC)[int(round(angle / (np.pi / 4))) % 8]
    ann, bt = transformed_coefficients(EllipticOperator.constant(np.eye(2)), chart_frame(chart), x)
    assert ann == pytest.approx(1.0)
    assert bt == pytest.approx(oracle, abs=1e-8)
    b = np.array([0.7, -1.3])
    _, bt_drift = transformed_coefficients(EllipticOperator.constant(np.eye(2), b), chart_frame(chart), x)
    assert bt_drift == pytest.approx(b @ n - 1.0, abs=1e-8)


def test_btilde_with_anisotropic_matrix_against_oracle():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    x = np.array([np.cos(1.1), np.sin(1.1)])
    t, n, dvn = _radial_frame_oracle(x)
    oracle = t @ A @ dvn
    chart = boundary_charts(DISC)[1]
    ann, bt = transformed_coefficients(EllipticOperator.constant(A), chart_frame(chart), x)
    assert ann == pytest.approx(n @ A @ n)
    assert bt == pytest.approx(oracle, abs=1e-8)


def test_flat_frame_coefficients():
    op = EllipticOperator.constant(3.0, [-1.5])
    assert transformed_coefficients(op, np.array([[1.0]]), 0.0) == pytest.approx((3.0, -1.5))
    assert transformed_coefficients(op, np.array([[-1.0]]), 1.0) == pytest.approx((3.0, 1.5))


def test_oblique_identity_matrix_is_normal():
    frame = chart_frame(boundary_charts(DISC)[2])
    xb = DISC.boundary_samples(16)[3:6]
    vt = oblique_direction(EllipticOperator.constant(np.eye(2)), frame, xb)
    assert np.abs(vt - frame.vectors(xb)[:, :, -1]).max() <= 1e-14


def test_oblique_direction_at_45_degrees():
    A = np.diag([2.0, 1.0])
    V = np.array([[-R2, -R2], [R2, -R2]])  # columns v_1, v_n
    vn, v1 = V[:, 1], V[:, 0]
    # hand arithmetic: <v_1, A v_n> = 1/2, <v_n, A v_n> = 3/2
    assert v1 @ A @ vn == pytest.approx(0.5)
    assert vn @ A @ vn == pytest.approx(1.5)
    hand = vn + v1 / 3.0
    conormal = A @ vn / (vn @ A @ vn)
    assert np.allclose(hand, conormal)
    assert np.allclose(hand, [-0.9428, -0.4714], atol=1e-4)
    op = EllipticOperator.constant(A)
    x = np.array([R2, R2])
    vt = oblique_direction(op, V, x, DISC)
    assert np.allclose(vt, hand, atol=1e-14)
    vt_chart = oblique_direction(op, chart_frame(boundary_charts(DISC)[1]), x, DISC)
    assert np.allclose(vt_chart, hand, atol=1e-12)
    assert vt_chart @ vn == pytest.approx(1.0)


def test_oblique_direction_axis_point():
    vt = oblique_direction(EllipticOperator.constant(np.diag([2.0, 1.0])), np.array([[0.0, -1.0], [1.0, 0.0]]), [1.0, 0.0])
    assert np.allclose(vt, [-1.0, 0.0])


def test_frame_errors():
    op = EllipticOperator.constant(np.eye(2))
    with pytest.raises(FrameNotOrthonormal):
        oblique_direction(op, np.array([[1.0, 0.5], [0.0, 1.0]]), [1.0, 0.0])
    with pytest.raises(NormalPointsOutward):
        oblique_direction(op, np.array([[0.0, 1.0], [1.0, 0.0]]), [1.0, 0.0], DISC)


# ---------------------------------------------------------------------------
# adapted charts


def test_interval_adapted_chart_keeps_coefficients():
    op = EllipticOperator.constant(2.0, [0.8])
    lo, hi = (build_adapted_chart(ch, op) for ch in boundary_charts(Interval(0.0, 2.0)))
    assert lo.boundary_coefficients(np.zeros((1, 0))) == pytest.approx(([2.0], [0.8]))
    # at the right end the inward normal is -1
    assert hi.boundary_coefficients(np.zeros((1, 0))) == pytest.approx(([2.0], [-0.8]))
    w = np.array([[0.13]])
    assert lo.psi(w)[0, 0] == pytest.approx(0.13)
    assert hi.psi(w)[0, 0] == pytest.approx(2.0 - 0.13)


@pytest.mark.parametrize("A", [np.eye(2), np.diag([2.0, 1.0]), np.array([[1.5, -0.4], [-0.4, 0.7]])])
def test_adapted_chart_normal_derivative_identity(A):
    op = EllipticOperator.constant(A, [0.3, -0.2])
    u = build_dl_member(op, DISC, 11).u
    E = build_extension(op, DISC)
    h = 1e-5
    for chart in E.charts:
        for wp in (-0.3, 0.0, 0.25):
            f = lambda wn: u.value(chart.psi(np.array([[wp, wn]])))[0]  # noqa: E731
            fd = (f(h) - f(-h)) / (2 * h)
            xb = chart.psi(np.array([[wp, 0.0]]))
            exact = u.gradient(xb)[0] @ oblique_direction(op, chart.frame, xb)[0]
            assert fd == pytest.approx(exact, abs=1e-6)


def test_adapted_chart_inverse_round_trip():
    op = EllipticOperator.constant([[2.0, 0.6], [0.6, 1.0]])
    chart = build_extension(op, DISC).charts[5]
    rng = np.random.default_rng(3)
    w = np.column_stack([rng.uniform(-0.5, 0.5, 200), rng.uniform(-chart.epsilon, 0.3, 200)])
    assert np.abs(chart.psi_inverse(chart.psi(w)) - w).max() < 1e-10


def test_collar_too_wide_for_strong_drift():
    op = EllipticOperator.constant(1.0, [-50.0])
    chart = build_adapted_chart(boundary_charts(Interval(0, 1))[0], op)
    assert chart.epsilon <= 0.9 / 50


# ---------------------------------------------------------------------------
# local and global extension


def test_local_extension_reflects_sine(heat, sine, half_period):
    chart = build_adapted_chart(boundary_charts(half_period)[0], heat)
    ext = local_extend(chart, sine)
    assert ext(-0.2) == pytest.approx(-0.19866933079506122, rel=1e-12)
    assert ext(1.0) == pytest.approx(np.sin(1.0))
    assert np.all(local_extend(chart, TestFunction.zero(1))(np.linspace(-0.2, 1, 11)) == 0.0)
    with pytest.raises(OutsideChart):
        ext(-0.5)


def test_local_extension_with_drift_follows_squeeze():
    op = EllipticOperator.constant(1.0, [2.0])
    u = TestFunction.polynomial({(1,): 1.0, (2,): -1.0, (3,): 1.0})
    chart = build_adapted_chart(boundary_charts(Interval(0, 1))[0], op)
    ext = local_extend(chart, u)
    for h in (0.01, 0.03, 0.05):
        assert ext(-h) == pytest.approx(-u(h + 2 * h * h), rel=1e-12)


def test_local_extension_checks_membership(heat):
    chart = build_adapted_chart(boundary_charts(Interval(0, 1))[0], heat)
    with pytest.raises(BoundaryConditionViolated):
        local_extend(chart, TestFunction.polynomial({(0,): 1.0}))


def test_global_extension_of_sine(heat, sine, half_period):
    E = build_extension(heat, half_period)
    eps = E.collar
    assert eps == pytest.approx(np.pi / 10)
    eta = smoothstep(-0.2, -0.9 * eps, -0.4 * eps)
    val = E.evaluate(sine, -0.2)
    assert val == pytest.approx(-np.sin(0.2) * eta, rel=1e-12)
    assert abs(val) <= np.sin(0.2)
    assert E.evaluate(sine, np.pi + 0.05) == pytest.approx(-np.sin(0.05))
    assert E.evaluate(sine, -eps - 1e-9) == 0.0


def test_global_extension_of_zero(heat, half_period):
    Eu = global_extend(build_extension(heat, half_period), TestFunction.zero(1), h=0.01)
    assert np.all(Eu.values == 0.0)


def test_global_extension_requires_membership():
    op = EllipticOperator.constant(1.0, [1.0])
    with pytest.raises(BoundaryConditionViolated):
        global_extend(build_extension(op, Interval(0, np.pi)), TestFunction.sine_series([1.0]), h=0.01)


@pytest.mark.parametrize(
    "dom,op",
    [
        (Interval(0.0, np.pi), EllipticOperator.constant(1.0, [-1.0])),
        (DISC, EllipticOperator.constant(np.diag([2.0, 1.0]))),
        (Disc((1.0, 2.0), 0.7), EllipticOperator.constant([[1.0, 0.2], [0.2, 1.4]], [0.5, 0.5])),
    ],
)
def test_partition_of_unity(dom, op):
    E = build_extension(op, dom)
    inside = dom.interior_samples(dom.diameter / 60)
    W = E.partition.weights(inside)
    assert np.all(W >= 0)
    assert np.abs(W.sum(axis=1) - 1).max() <= 1e-12
    lo, hi = dom.bounding_box(E.collar)
    out = np.random.default_rng(0).uniform(lo, hi, size=(3000, dom.dim))
    out = out[dom.signed_distance(out) < 0]
    Wo = E.partition.weights(out)
    assert Wo[:, 0].max() == 0.0
    assert Wo.sum(axis=1).max() <= 1 + 1e-12
    # each chart weight vanishes beyond its collar
    far = dom.signed_distance(out) <= -0.9 * E.collar
    assert np.all(Wo[far] == 0.0)
    # eta_0 stays away from the boundary
    near = np.abs(dom.signed_distance(inside)) < 0.1 * dom.diameter / 8
    assert np.all(W[near, 0] == 0.0)


@pytest.mark.parametrize("seed", range(6))
def test_reflection_sign(seed):
    op = EllipticOperator.constant([[1.3, 0.4], [0.4, 0.9]], [0.2, -0.6])
    E = build_extension(op, DISC)
    u = build_dl_member(op, DISC, seed).u
    chart = E.charts[seed % 8]
    rng = np.random.default_rng(seed)
    w = np.column_stack([rng.uniform(-0.4, 0.4, 100), rng.uniform(-0.99 * chart.epsilon, -1e-3, 100)])
    x = chart.psi(w)
    y = chart.psi(chart.squeeze(w))
    assert np.all(DISC.signed_distance(y) > 0)
    assert np.all(local_extend(chart, u)(x) * u.value(y) <= 0)


@pytest.mark.parametrize(
    "dom,op",
    [
        (Interval(0.0, np.pi), EllipticOperator.constant(0.8, [1.5], -0.3)),
        (DISC, EllipticOperator.constant(np.diag([2.0, 1.0]), [0.4, 0.1])),
    ],
)
@pytest.mark.parametrize("seed", range(3))
def test_contraction_and_restriction(dom, op, seed):
    E = build_extension(op, dom)
    u = build_dl_member(op, dom, seed).u
    h = 1e-3 if dom.dim == 1 else 0.02
    Eu = global_extend(E, u, h=h)
    inside = dom.signed_distance(Eu.grid.nodes) >= 0
    assert Eu.sup() == Eu.sup(inside)
    assert Eu.sup(inside) == np.abs(u.value(Eu.grid.nodes[inside])).max()
    probes = dom.interior_samples(0.037)
    err = np.abs(Eu(probes) - u.value(probes)).max()
    assert err <= (1e-6 if dom.dim == 1 else 1e-4)
    far = dom.signed_distance(Eu.grid.nodes) <= -E.collar
    assert np.all(Eu.flat[far] == 0.0)


def test_restriction_error_is_second_order_or_better(heat, half_period):
    u = build_dl_member(heat, half_period, 5).u
    E = build_extension(heat, half_period)
    probes = half_period.interior_samples(0.0123)
    errs = []
    for h in (0.04, 0.02):
        Eu = global_extend(E, u, h=h)
        errs.append(np.abs(Eu(probes) - u.value(probes)).max())
    assert errs[1] <= errs[0] / 4


@pytest.mark.parametrize("seed", range(3))
def test_boundary_identity_on_disc(seed):
    op = EllipticOperator.constant([[2.0, 0.5], [0.5, 1.0]], [0.3, -0.4])
    E = build_extension(op, DISC)
    u = build_dl_member(op, DISC, seed).u
    theta = np.pi / 4 * np.arange(8) + 0.05
    for k, th in enumerate(theta):
        x = np.array([np.cos(th), np.sin(th)])
        assert abs(boundary_identity_residual(op, E.charts[k].frame, u, x, 1e-4)) <= 1e-4


def test_boundary_identity_needs_d_of_L_member():
    op = EllipticOperator.constant(np.eye(2))
    E = build_extension(op, DISC)
    # u = 1 - |x|^2 vanishes on the circle but Lu = -4 there
    u = TestFunction.polynomial({(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0})
    assert abs(boundary_identity_residual(op, E.charts[0].frame, u, [1.0, 0.0])) == pytest.approx(4.0, rel=1e-3)


def test_constant_frame_helper():
    f = Frame.constant(np.eye(2))
    assert f.vectors(np.zeros((3, 2))).shape == (3, 2, 2)
    assert np.all(f.normal_derivatives(np.zeros((3, 2))) == 0)


def test_materialize_on_custom_grid(heat, sine, half_period):
    E = build_extension(heat, half_period)
    grid = Grid(np.array([-0.5]), 0.01, (420,))
    Eu = E.materialize(sine, grid)
    assert Eu.values[0] == 0.0
    assert Eu(1.0) == pytest.approx(np.sin(1.0), abs=1e-8)
