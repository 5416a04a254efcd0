import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bergman_lab.holo import (
    LogKernel,
    Polynomial,
    PowerKernel,
    apply_tg,
    cesaro_symbol,
    from_json,
    is_constant,
    kernel_K,
    kernel_Kp,
    random_polynomial,
)
from bergman_lab.quadrature import SpaceParams


def poly_pair(seed, n, degree):
    rng = np.random.default_rng(seed)
    return random_polynomial(n, degree, rng), random_polynomial(n, degree, rng)


# ------------------------------------------------------------ radial derivative


def test_radial_derivative_examples():
    p = Polynomial(2, {(2, 1): 1.0})
    assert p.radial_derivative().coeffs == {(2, 1): 3.0}
    assert Polynomial.constant(2, 5.0).radial_derivative().coeffs == {}
    rg = LogKernel([1.0]).radial_derivative()
    assert rg([0.5]) == pytest.approx(1.0)


def test_power_kernel_radial_derivative():
    w = np.array([0.3 + 0.2j, -0.1j])
    K = PowerKernel(w, 2.5)
    z = np.array([0.2, 0.4 - 0.1j])
    u = np.vdot(w, z)
    expected = 2.5 * u * (1 - u) ** -3.5
    assert K.radial_derivative()(z) == pytest.approx(expected, rel=1e-13)


def test_radial_derivative_matches_finite_difference():
    g = cesaro_symbol(2) * PowerKernel([0.2, 0.5j], 1.5) + Polynomial(2, {(1, 2): 2.0})
    z = np.array([0.3 - 0.2j, 0.1 + 0.4j])
    h = 1e-6
    fd = (g((1 + h) * z) - g((1 - h) * z)) / (2 * h)
    assert g.radial_derivative()(z) == pytest.approx(fd, rel=1e-7)


# ------------------------------------------------------------ evaluation


def test_evaluation_examples():
    assert Polynomial(2, {(1, 1): 3.0})([0.5, 0.2]) == pytest.approx(0.3)
    assert LogKernel([1.0])([0.0]) == 0
    assert PowerKernel([0.5], 2)([0.5]) == pytest.approx(16 / 9)


def test_kernels():
    s21 = SpaceParams(1, 2, 0)
    assert kernel_K([0.3], s21).s == 2
    assert kernel_K([0.0], s21)([0.7]) == 1
    assert kernel_K([0.1, 0.2], SpaceParams(2, 2, 1)).s == 4
    assert kernel_Kp([0.3], SpaceParams(1, 1, 0), m=3).s == 3
    assert kernel_Kp([0.0], SpaceParams(1, 1, 0))([0.7]) == 1
    assert kernel_Kp([0.3], SpaceParams(1, 0.5, 0.5), m=3).s == 6
    with pytest.raises(ValueError):
        kernel_Kp([0.3], SpaceParams(1, 1, 0), m=2)


# ------------------------------------------------------------ T_g


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2]), st.integers(0, 12))
def test_fundamental_identity(seed, n, degree):
    f, g = poly_pair(seed, n, degree)
    tg = apply_tg(f, g)
    assert tg.radial_derivative().max_coefficient_difference(f * g.radial_derivative()) <= 1e-12
    assert tg.coefficient((0,) * n) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2]))
def test_tg_one_is_g_minus_g0(seed, n):
    g = random_polynomial(n, 15, np.random.default_rng(seed))
    tg = apply_tg(Polynomial.constant(n, 1.0), g)
    expect = g + (-g.coefficient((0,) * n))
    assert tg.coeffs == expect.coeffs


def test_tg_examples():
    z = Polynomial.variable(1, 0)
    tg = apply_tg(z, z * z)
    assert tg.coeffs == {(3,): pytest.approx(2 / 3)}
    f = Polynomial.from_dense([1.0, 1.0])
    got = apply_tg(f, LogKernel([1.0]), degree=6).dense(5)
    assert np.allclose(got, [0, 1, 1, 2 / 3, 1 / 2], atol=1e-15)


def test_cesaro_law():
    rng = np.random.default_rng(5)
    a = rng.standard_normal(21) + 1j * rng.standard_normal(21)
    got = apply_tg(Polynomial.from_dense(a), LogKernel([1.0]), degree=40).dense(22)
    for N in range(21):
        assert abs(got[N + 1] - a[: N + 1].sum() / (N + 1)) <= 1e-12


def test_linearity_and_constant_symbol():
    f1, g1 = poly_pair(1, 2, 8)
    f2, g2 = poly_pair(2, 2, 8)
    lhs = apply_tg(f1.scale(2.0) + f2, g1)
    rhs = apply_tg(f1, g1).scale(2.0) + apply_tg(f2, g1)
    assert lhs.max_coefficient_difference(rhs) <= 1e-12
    lhs = apply_tg(f1, g1 + g2.scale(-3j))
    rhs = apply_tg(f1, g1) + apply_tg(f1, g2).scale(-3j)
    assert lhs.max_coefficient_difference(rhs) <= 1e-12
    assert apply_tg(f1, Polynomial.constant(2, 7.0)).coeffs == {}


def test_quadrature_matches_exact():
    rng = np.random.default_rng(7)
    for n in (1, 2):
        f, g = poly_pair(n, n, 10)
        exact = apply_tg(f, g)
        quad = apply_tg(f, g, mode="quadrature")
        Z = rng.standard_normal((100, n)) + 1j * rng.standard_normal((100, n))
        Z *= (0.99 * rng.random(100) / np.linalg.norm(Z, axis=1))[:, None]
        assert np.max(np.abs(quad(Z) - exact(Z))) <= 1e-10


def test_quadrature_for_closed_forms():
    f = PowerKernel([0.9], 2.0)
    g = LogKernel([1.0])
    exact = apply_tg(f, g, degree=400)
    quad = apply_tg(f, g, mode="quadrature")
    z = np.array([[0.6 + 0.2j], [-0.5j], [0.7]])
    assert np.allclose(quad(z), exact(z), atol=1e-10)


def test_exact_mode_needs_polynomials():
    with pytest.raises(TypeError):
        apply_tg(Polynomial.constant(1, 1.0), LogKernel([1.0]))


# ------------------------------------------------------------ misc


def test_cesaro_symbol_is_interior_regular():
    g = cesaro_symbol(3)
    assert np.isclose(np.linalg.norm(g.b), 1)
    assert np.isfinite(g(np.full(3, 0.5)))
    with pytest.raises(ValueError):
        LogKernel([1.0, 1.0])


def test_is_constant():
    assert is_constant(Polynomial.constant(2, 3.0))
    assert not is_constant(cesaro_symbol(2))
    assert is_constant(LogKernel([0.0]) + 1.0)


@pytest.mark.parametrize(
    "h",
    [
        random_polynomial(2, 5, np.random.default_rng(0)),
        LogKernel([0.3j, 0.5], coef=2 - 1j),
        PowerKernel([0.5], 2.5) * Polynomial.variable(1, 0) + cesaro_symbol(1),
    ],
)
def test_json_roundtrip(h):
    back = from_json(json.loads(json.dumps(h.to_json())))
    Z = np.full((3, h.n), 0.1) * np.arange(1, 4)[:, None]
    assert np.allclose(back(Z), h(Z), rtol=1e-15)
