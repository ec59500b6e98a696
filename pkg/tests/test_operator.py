import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from feynman_dirichlet import (
    AsymmetricMatrix,
    BoundaryConditionViolated,
    CoefficientUnbounded,
    EllipticityViolation,
    EllipticOperator,
    Interval,
    MissingDerivatives,
    TestFunction,
    apply_L,
    build_dl_member,
    dissipativity_residual,
    lambda0,
    validate,
)
from feynman_dirichlet.operator import operator_from_spec, scalar_field

UNIT = Interval(0.0, 1.0)


def _field_op(a, b=0.0, c=0.0, dim=2, lam=0.5, bound=10.0):
    return EllipticOperator(
        dim,
        lambda x: np.broadcast_to(np.asarray(a, dtype=float), (len(x), dim, dim)),
        lambda x: np.full((len(x), dim), b),
        lambda x: np.full(len(x), c),
        lam,
        bound,
    )


def test_identity_validates():
    rep = validate(EllipticOperator.constant(np.eye(3)), np.random.default_rng(0).uniform(size=(50, 3)))
    assert rep.min_eig == 1.0
    assert rep.symmetry_defect == 0.0


def test_min_eig_matches_characteristic_polynomial():
    # roots of l^2 - 4 l + 3
    expected = np.roots([1.0, -4.0, 3.0]).min()
    rep = validate(EllipticOperator.constant([[2.0, 1.0], [1.0, 2.0]]), np.zeros((5, 2)))
    assert rep.min_eig == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(1.0)


def test_asymmetric_matrix_rejected():
    op = _field_op([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(AsymmetricMatrix) as info:
        validate(op, np.zeros((3, 2)))
    assert info.value.defect == pytest.approx(np.sqrt(2.0))


def test_ellipticity_and_bound_violations():
    with pytest.raises(EllipticityViolation):
        validate(_field_op(np.eye(2) * 0.1), np.zeros((2, 2)))
    with pytest.raises(CoefficientUnbounded):
        validate(_field_op(np.eye(2), b=20.0), np.zeros((2, 2)))


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(0.1, 3.0))
def test_constant_min_eig_is_exact(entries, shift):
    M = np.array([[entries[0], entries[1]], [entries[1], entries[2]]])
    A = M @ M.T + shift * np.eye(2)
    rep = validate(EllipticOperator.constant(A, bound=100.0), np.zeros((1, 2)))
    assert rep.min_eig == pytest.approx(np.linalg.eigvalsh(A)[0], abs=1e-10)


def test_apply_L_examples(heat):
    assert apply_L(heat, TestFunction.sine_series([1.0]), np.pi / 2) == pytest.approx(-1.0, abs=1e-15)
    parabola = TestFunction.polynomial({(1,): 1.0, (2,): -1.0})
    assert apply_L(EllipticOperator.constant(1.0, [1.0]), parabola, 0.5) == pytest.approx(-2.0)


def test_apply_L_missing_hessian(heat):
    u = TestFunction(1, lambda x: x[:, 0], lambda x: np.ones_like(x))
    with pytest.raises(MissingDerivatives):
        apply_L(heat, u, 0.3)


def _fd_L(op, f, x, h):
    n = x.shape[1]
    A, b, c = op.coefficients(x)
    out = c * f(x)
    E = np.eye(n) * h
    for i in range(n):
        out += b[:, i] * (f(x + E[i]) - f(x - E[i])) / (2 * h)
        for j in range(n):
            d2 = (f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4 * h * h)
            out += A[:, i, j] * d2
    return out


def test_apply_L_against_finite_differences():
    rng = np.random.default_rng(4)
    terms = {tuple(int(e) for e in rng.integers(0, 4, 2)): float(c) for c in rng.normal(size=6)}
    u = TestFunction.polynomial(terms)
    op = EllipticOperator.constant([[1.5, 0.3], [0.3, 0.8]], [0.4, -0.7], -0.2)
    x = rng.uniform(-1, 1, size=(20, 2))
    exact = apply_L(op, u, x)
    errs = [np.abs(_fd_L(op, u.value, x, h) - exact).max() for h in (1e-2, 1e-3)]
    assert errs[1] < 1e-4
    assert errs[1] < errs[0] / 20


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
def test_apply_L_is_linear(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    u = TestFunction.polynomial({(2, 1): rng.normal(), (0, 3): rng.normal(), (1, 0): rng.normal()})
    v = TestFunction.polynomial({(1, 1): rng.normal(), (3, 0): rng.normal()})
    op = EllipticOperator.constant([[2.0, 0.5], [0.5, 1.0]], rng.normal(size=2), rng.normal())
    x = rng.uniform(-1, 1, size=(10, 2))
    lhs = apply_L(op, alpha * u + beta * v, x)
    rhs = alpha * apply_L(op, u, x) + beta * apply_L(op, v, x)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(rhs).max()))


def test_lambda0_examples():
    assert lambda0(EllipticOperator.constant(1.0), UNIT, 0.01) == 0.0
    falling = operator_from_spec({"c": {"family": "polynomial", "coeffs": [-1.0, 0.0, -1.0]}}, 1, UNIT)
    assert lambda0(falling, UNIT, 0.01) == -1.0
    wavy = operator_from_spec({"c": {"family": "trig", "freq": 10.0}}, 1, UNIT)
    # sin(10 x) peaks at pi/20 inside (0, 1)
    assert abs(lambda0(wavy, UNIT, 1e-4) - 1.0) < 1e-3


def test_dissipativity_examples(heat):
    assert dissipativity_residual(heat, TestFunction.sine_series([1.0]), Interval(0, np.pi), 1e-3) == pytest.approx(-1.0)
    bump = TestFunction.polynomial({(1,): 1.0, (2,): -1.0})
    assert dissipativity_residual(heat, bump, UNIT, 1e-3) == pytest.approx(-2.0)


@pytest.mark.parametrize("seed", range(5))
def test_dissipativity_on_harness_members(seed):
    op = EllipticOperator.constant(1.0, [1.0], -0.5)
    dom = Interval(0.0, np.pi)
    u = build_dl_member(op, dom, seed).u
    assert dissipativity_residual(op, u, dom, 1e-3) <= 1e-8


def test_dissipativity_requires_zero_boundary(heat):
    with pytest.raises(BoundaryConditionViolated):
        dissipativity_residual(heat, TestFunction.polynomial({(0,): 1.0}), UNIT, 0.01)


def test_config_fields_have_matching_gradients():
    x = np.random.default_rng(1).uniform(-1, 1, size=(30, 2))
    for spec in (
        {"family": "polynomial", "coeffs": [0.5, -1.0, 2.0], "axis": 1},
        {"family": "trig", "amplitude": 0.3, "freq": 2.0, "phase": 0.4, "offset": 1.0, "axis": 0},
    ):
        f, g = scalar_field(spec, 2)
        h = 1e-6
        fd = np.column_stack([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(2)])
        assert np.allclose(g(x), fd, atol=1e-8)


def test_operator_from_spec_estimates_constants():
    op = operator_from_spec({"a": 2.0, "b": 1.0, "c": -3.0}, 1, UNIT)
    assert op.ellipticity_lambda == pytest.approx(2 * 0.999)
    assert op.bound_C == pytest.approx(3 * 1.001)
    validate(op, UNIT.interior_samples(0.01))
