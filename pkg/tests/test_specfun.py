import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nodalchaos import specfun

# frozen reference values
C_CHI = {0: math.sqrt(2 / math.pi), 1: 1 / math.sqrt(2 * math.pi), 2: -1 / (12 * math.sqrt(2 * math.pi))}


def test_hermite_examples():
    assert specfun.hermite_eval(0, 3.7) == 1
    assert [specfun.hermite_eval(2, x) for x in (0, 1, 2)] == [-1, 0, 3]
    assert specfun.hermite_eval(4, 0) == 3
    assert specfun.hermite_coefficients(3) == [0, -3, 0, 1]


def test_hermite_at_zero():
    assert specfun.hermite_at_zero(0) == 1
    assert specfun.hermite_at_zero(2) == 3
    assert specfun.hermite_at_zero(3) == specfun.hermite_eval(6, 0) == -15


def test_hermite_recurrence_matches_generating_function():
    xs = np.linspace(-5, 5, 50)
    for q in range(13):
        ref = np.polynomial.polynomial.polyval(xs, specfun.hermite_coefficients(q))
        got = specfun.hermite_eval(q, xs)
        assert np.all(np.abs(got - ref) <= 1e-10 * np.maximum(1, np.abs(ref)))


def test_hermite_orthogonality_gauss_hermite():
    x, w = np.polynomial.hermite_e.hermegauss(40)
    w = w / math.sqrt(2 * math.pi)
    for q in range(9):
        for r in range(9):
            val = w @ (specfun.hermite_eval(q, x) * specfun.hermite_eval(r, x))
            assert abs(val - (math.factorial(q) if q == r else 0)) < 1e-8


def test_hermite_table_and_degree_cap():
    x = np.linspace(-2, 2, 7)
    tab = specfun.hermite_table(6, x)
    for q in range(7):
        assert np.allclose(tab[q], specfun.hermite_eval(q, x))
    with pytest.raises(specfun.DegreeTooLargeError):
        specfun.hermite_eval(65, 0.0)


def test_laguerre_examples():
    assert specfun.laguerre_eval(0, 0.5, 7.0) == 1
    assert specfun.laguerre_eval(1, 0, 2.0) == -1
    assert specfun.laguerre_eval(2, 0, 0.0) == 1
    # L_k^(a)(0) = Gamma(k + a + 1) / (k! Gamma(a + 1))
    for k, a in ((3, 0.5), (4, 1.0), (2, 2.5)):
        ref = math.gamma(k + a + 1) / (math.factorial(k) * math.gamma(a + 1))
        assert specfun.laguerre_eval(k, a, 0.0) == pytest.approx(ref, rel=1e-13)


def test_sphere_area():
    assert specfun.sphere_area(0) == pytest.approx(2)
    assert specfun.sphere_area(1) == pytest.approx(2 * math.pi)
    assert specfun.sphere_area(2) == pytest.approx(4 * math.pi)
    assert specfun.sphere_area(3) == pytest.approx(2 * math.pi**2)
    assert math.isfinite(specfun.sphere_area(50))


def test_beta_examples():
    assert specfun.beta_const(2, 1) == pytest.approx(4)
    assert specfun.beta_const(2, 2) == pytest.approx(math.pi)
    assert specfun.beta_const(2, 4) == pytest.approx(3 * math.pi / 4)
    for n in range(1, 7):
        assert specfun.beta_const(n, 1) == pytest.approx(specfun.sphere_area(n) / math.pi)


def _beta_by_quadrature(n, q):
    # s_{n-2} int_0^pi |cos t|^q sin^{n-2} t dt, split at pi/2 so both halves are smooth
    t, w = np.polynomial.legendre.leggauss(80)
    t, w = (t + 1) * math.pi / 4, w * math.pi / 4
    half = w @ (np.abs(np.cos(t)) ** q * np.sin(t) ** (n - 2))
    return specfun.sphere_area(n - 2) * 2 * half


def test_beta_matches_quadrature():
    for n in range(2, 6):
        for q in range(9):
            assert specfun.beta_const(n, q) == pytest.approx(_beta_by_quadrature(n, q), rel=1e-10)


def _c_chi_gauss_laguerre(b):
    # E|g| H_2b(g) / (2b)! with u = g^2 / 2: (2 / sqrt(2 pi)) int_0^inf H_2b(sqrt(2u)) e^-u du
    u, w = np.polynomial.laguerre.laggauss(30)
    val = w @ specfun.hermite_eval(2 * b, np.sqrt(2 * u))
    return 2 * val / math.sqrt(2 * math.pi) / math.factorial(2 * b)


def test_c_chi_examples_and_quadrature():
    for b, ref in C_CHI.items():
        assert specfun.c_chi(b) == pytest.approx(ref, rel=1e-12)
    for b in range(6):
        assert abs(specfun.c_chi(b) - _c_chi_gauss_laguerre(b)) < 1e-8


def test_a_coeff():
    assert specfun.a_coeff(2, 0) == pytest.approx(math.sqrt(2 / math.pi) / 4)
    assert specfun.a_coeff(2, 1) == pytest.approx(0.0997356, rel=1e-6)
    for n in (1, 2, 3, 5):
        for b in range(4):
            assert specfun.a_coeff(n, b) * specfun.sphere_area(n) / math.pi == pytest.approx(specfun.c_chi(b))


def test_theta_values():
    assert specfun.theta(0, 0) == 1
    assert specfun.theta(2, 0) == Fraction(1, 8)
    assert specfun.theta(1, 1) == Fraction(-1, 4)
    assert specfun.theta(0, 2) == Fraction(-1, 24)
    assert specfun.theta(1, 0) == Fraction(-1, 2)
    assert specfun.theta(0, 1) == Fraction(1, 2)


@given(st.integers(0, 8), st.integers(0, 8))
def test_theta_factorizes_into_delta_and_chi(a, b):
    delta = specfun.hermite_at_zero(a) / (math.factorial(2 * a) * math.sqrt(2 * math.pi))
    assert float(specfun.theta(a, b)) == pytest.approx(math.pi * delta * specfun.c_chi(b), rel=1e-12)


def test_c_dq_examples():
    assert specfun.c_dq(2, 2) == pytest.approx(-1 / (2 * math.pi))
    for d in (2, 3, 4, 5):
        assert specfun.c_dq(d, 0) == pytest.approx(1 / specfun.sphere_area(d - 1))
    with pytest.raises(ValueError):
        specfun.c_dq(3, 3)


def test_laguerre_identity_fiber_quadrature():
    from nodalchaos import geometry
    rng = np.random.default_rng(5)
    for d in (2, 3, 4):
        pts, w = geometry.sphere_quadrature(d, 24)
        for q in (2, 4, 6):
            for _ in range(20):
                xi = rng.normal(size=d) * 1.5
                S = w @ specfun.hermite_eval(q, pts @ xi)
                lhs = specfun.laguerre_eval(q // 2, d / 2 - 1, xi @ xi / 2)
                assert abs(lhs - specfun.c_dq(d, q) * S) <= 1e-8 * (1 + np.linalg.norm(xi) ** q)


def test_diagram4_examples():
    assert specfun.diagram4(0, 0, 0, 0, 0.3, 0.1, -0.2, 0.5) == 1
    assert specfun.diagram4(1, 0, 2, 0, 0.3, 0.1, -0.2, 0.5) == 0
    c = [Fraction(1, 3), Fraction(-2, 5), Fraction(1, 7), Fraction(3, 4)]
    assert specfun.diagram4(1, 1, 1, 1, *c) == c[0] * c[3] + c[1] * c[2]


def test_wick_oracle_examples():
    rho = Fraction(2, 5)
    cov = [[1, rho, 0, 0], [rho, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
    assert specfun.wick_oracle((1, 1, 0, 0), cov) == rho
    assert specfun.wick_oracle((2, 2, 0, 0), cov) == 2 * rho**2
    c13, c14 = Fraction(1, 3), Fraction(-1, 2)
    cov = [[1, 0, c13, c14], [0, 1, 0, 0], [c13, 0, 1, 0], [c14, 0, 0, 1]]
    assert specfun.wick_oracle((2, 0, 1, 1), cov) == 2 * c13 * c14
    assert specfun.wick_oracle((1, 0, 0, 0), cov) == 0


corr = st.fractions(min_value=-1, max_value=1, max_denominator=9)


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 6), corr, corr, corr, corr)
def test_diagram4_equals_wick_exactly(h, a_, a2_, c13, c14, c23, c24):
    a, a2 = min(a_, h), min(a2_, h)
    # odd and even degrees alike; total degree 2h on each side
    deg = (a, 2 * h - a, a2, 2 * h - a2)
    cov = [[1, 0, c13, c14], [0, 1, c23, c24], [c13, c23, 1, 0], [c14, c24, 0, 1]]
    assert specfun.diagram4(*deg, c13, c14, c23, c24) == specfun.wick_oracle(deg, cov)


def test_coefficient_bound():
    assert specfun.coefficient_bound(0) == (1, 1)
    s, b = specfun.coefficient_bound(2)
    assert (s, b) == (2, 4)
    for q in range(2, 13, 2):
        s, b = specfun.coefficient_bound(q)
        assert s < b == 2**q


def test_vandermonde_bound():
    for q in range(0, 11, 2):
        for a, b in specfun.splits(q):
            for a2, b2 in specfun.splits(q):
                assert specfun.vandermonde_sum(a, b, a2, b2) <= math.factorial(q)


@given(st.integers(0, 3), st.integers(0, 3), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(-1, 1))
def test_diagram4_swap_symmetry(a, b, c13, c14, c23, c24):
    # exchanging the two points swaps (a, b) with (a2, b2) and transposes the cross block
    a2, b2 = b, a
    lhs = specfun.diagram4(a, b, a2, b2, c13, c14, c23, c24)
    rhs = specfun.diagram4(a2, b2, a, b, c13, c23, c14, c24)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
