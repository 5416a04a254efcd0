import numpy as np
import pytest

from bergman_lab.holo import LogKernel, Polynomial
from bergman_lab.symbols import SymbolError, parse_symbol


def close(h, ref, n=1):
    Z = np.array([[0.3 + 0.1j] * n, [-0.2j] * n, [0.5] * n]) / np.sqrt(n)
    return np.allclose(h(Z), ref(Z), rtol=1e-13, atol=1e-15)


def test_monomials():
    p = parse_symbol("z1^2*z2 - 3*z2 + 1.5i", n=2)
    assert isinstance(p, Polynomial)
    assert p.coeffs == {(2, 1): 1.0, (0, 1): -3.0, (0, 0): 1.5j}


def test_default_variable_and_parentheses():
    p = parse_symbol("(1+z)^3")
    assert np.allclose(p.dense(), [1, 3, 3, 1])


def test_closed_forms():
    g = parse_symbol("ces(1)")
    assert close(g, lambda Z: -np.log(1 - Z[:, 0]))
    h = parse_symbol("pow(1; 0.5)")
    assert close(h, lambda Z: (1 - Z[:, 0]) ** -0.5)
    k = parse_symbol("2*pow(0.5+0.5i; 2) + z")
    w = 0.5 + 0.5j
    assert close(k, lambda Z: 2 * (1 - Z[:, 0] * np.conj(w)) ** -2 + Z[:, 0])


def test_cesaro_default_direction():
    g = parse_symbol("ces()", n=2)
    assert isinstance(g, LogKernel)
    assert np.allclose(g.b, [2**-0.5, 2**-0.5])
    vec = parse_symbol("ces(0.6, 0.8i)", n=2)
    assert np.allclose(vec.b, [0.6, 0.8j])


def test_constant():
    c = parse_symbol("-4")
    assert c.coeffs == {(0,): -4.0}


@pytest.mark.parametrize(
    "text,n",
    [("", 1), ("z3", 2), ("z^-1", 1), ("z^0.5", 1), ("ces(1,2,3)", 2), ("pow(0.5)", 1),
     ("(z", 1), ("z)", 1), ("foo", 1), ("ces(2)", 1)],
)
def test_errors(text, n):
    with pytest.raises(ValueError):
        parse_symbol(text, n)


def test_symbol_error_is_value_error():
    assert issubclass(SymbolError, ValueError)
