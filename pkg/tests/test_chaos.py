import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nodalchaos import chaos, field, geometry, nodal, specfun


@pytest.fixture(scope="module")
def torus_quads():
    return chaos.quadratures(geometry.TORUS2, 32, 32)


def test_expected_length_homothetic():
    for spec, vol in ((field.make_arw(1), 1.0), (field.make_arw(5), 1.0), (field.make_rsh(10), 4 * math.pi)):
        quads = chaos.quadratures(spec.manifold, 24)
        ref = vol * specfun.sphere_area(1) / (specfun.sphere_area(2) * math.sqrt(2)) * math.sqrt(spec.lam2)
        assert chaos.expected_length(spec, quads) == pytest.approx(ref, rel=1e-12)


def test_second_component_cancels_for_rsh():
    spec = field.make_rsh(5)
    quads = chaos.quadratures(spec.manifold, 24)
    coeffs, _ = field.sample_batch(spec, 1, 5)
    assert np.abs(chaos.chaos_values(spec, coeffs, 2, quads)).max() <= 1e-6


def test_forms_agree_on_anisotropic_sample():
    spec = field.anisotropic_family(0.2)
    s = field.sample_field(spec, 17)
    quads = chaos.quadratures(geometry.TORUS2, 64, 64)
    vals = [chaos.chaos_q(s, 4, quads, f).value for f in chaos.FORMS]
    assert max(vals) - min(vals) <= 1e-4


def test_form_agreement_improves_with_resolution():
    spec = field.anisotropic_family(0.5)
    coeffs, _ = field.sample_batch(spec, 1, 3)
    gaps = []
    for res, K in ((8, 4), (16, 8), (32, 16)):
        q = chaos.quadratures(geometry.TORUS2, res, K)
        v = {f: chaos.chaos_values(spec, coeffs, 4, q, f) for f in chaos.FORMS}
        gaps.append(max(np.abs(v[f] - v["general"]).max() for f in chaos.FORMS))
    assert gaps[1] <= gaps[0] / 2 and gaps[2] <= gaps[1] / 2


def test_odd_and_out_of_range_q_rejected(torus_quads):
    spec = field.make_arw(1)
    with pytest.raises(ValueError):
        chaos.chaos_values(spec, np.zeros((1, spec.size)), 3, torus_quads)
    with pytest.raises(ValueError):
        chaos.chaos_values(spec, np.zeros((1, spec.size)), 14, torus_quads)
    with pytest.raises(ValueError):
        chaos.tilde_values(spec, np.zeros((1, spec.size)), 1, torus_quads)
    with pytest.raises(ValueError):
        chaos.chaos_values(spec, np.zeros((1, spec.size)), 2, torus_quads, form="polar")


@pytest.mark.parametrize("q", [2, 4, 6])
def test_tilde_equals_chaos_when_homothetic(q, torus_quads):
    for spec in (field.make_arw(5), field.make_band("torus", [1, 5])):
        coeffs, _ = field.sample_batch(spec, 2, 3)
        a = chaos.chaos_values(spec, coeffs, q, torus_quads)
        b = chaos.tilde_values(spec, coeffs, q, torus_quads)
        assert np.abs(a - b).max() <= 1e-8


def test_closed2(torus_quads):
    band = field.make_band("torus", [1, 5])
    s = field.sample_field(band, 4)
    st2 = chaos.closed2(s, torus_quads.manifold)
    assert st2.value == pytest.approx(chaos.tilde_q(s, 2, torus_quads).value, abs=1e-10)
    arw = field.make_arw(5)
    coeffs, _ = field.sample_batch(arw, 3, 4)
    assert np.all(chaos.closed2_values(arw, coeffs, torus_quads.manifold)[1] == 0)
    zero = field.FieldSample(band, np.zeros(band.size))
    assert chaos.closed2(zero, torus_quads.manifold).value == 0
    coarse = geometry.build_manifold_quadrature(geometry.TORUS2, 4)
    with pytest.raises(ArithmeticError):
        chaos.closed2(s, coarse)


def test_closed4(torus_quads):
    spec = field.make_arw(5)
    zero = field.FieldSample(spec, np.zeros(spec.size))
    assert chaos.closed4(zero, torus_quads.manifold).value == pytest.approx(0, abs=1e-14)
    s = field.sample_field(spec, 5)
    assert chaos.closed4(s, torus_quads.manifold).value == pytest.approx(
        chaos.tilde_q(s, 4, torus_quads).value, abs=1e-6)
    band = field.make_band("torus", [1, 5])
    coeffs, _ = field.sample_batch(band, 6, 3)
    assert np.allclose(chaos.closed4_values(band, coeffs, torus_quads.manifold),
                       chaos.chaos_values(band, coeffs, 4, torus_quads), atol=1e-9)


def test_closed4_centered():
    spec = field.make_arw(5)
    coeffs, _ = field.sample_batch(spec, 31, 500)
    vals = chaos.closed4_values(spec, coeffs, geometry.build_manifold_quadrature(geometry.TORUS2, 32))
    mean, se = nodal.mean_se(vals)
    assert abs(mean) <= 4 * se


def test_centering_and_orthogonality():
    spec = field.make_band("torus", [1, 5])
    quads = chaos.quadratures(geometry.TORUS2, 32, 32)
    coeffs, _ = field.sample_batch(spec, 77, 500)
    c2 = chaos.chaos_values(spec, coeffs, 2, quads)
    c4 = chaos.chaos_values(spec, coeffs, 4, quads)
    for v in (c2, c4):
        m, se = nodal.mean_se(v)
        assert abs(m) <= 4 * se
    cov, se = nodal.cov_se(c2, c4)
    assert abs(cov) <= 4 * se


def test_sphere_forms_and_surrogate():
    spec = field.make_band("sphere", [2, 3])
    quads = chaos.quadratures(geometry.SPHERE2, 24, 32)
    coeffs, _ = field.sample_batch(spec, 8, 2)
    v = {f: chaos.chaos_values(spec, coeffs, 4, quads, f) for f in chaos.FORMS}
    for f in chaos.FORMS:
        assert np.allclose(v[f], v["general"], atol=1e-9)
    assert np.allclose(chaos.tilde_values(spec, coeffs, 4, quads), v["general"], atol=1e-9)
    by_quad, spectral = chaos.closed2_values(spec, coeffs, quads.manifold)
    assert np.allclose(by_quad, spectral, atol=1e-10)
    assert np.allclose(chaos.chaos_values(spec, coeffs, 2, quads), spectral, atol=1e-9)


def test_chi_partial_mean_and_one_dimension():
    assert chaos.chi_partial(np.zeros(3), np.eye(3), 0) == pytest.approx(2 * math.sqrt(2 / math.pi), abs=1e-6)
    xs = np.linspace(-2, 2, 9)
    for Q in (0, 2, 6):
        got = chaos.chi_partial(xs[:, None], np.eye(1), Q)
        ref = sum(specfun.c_chi(b) * specfun.hermite_eval(2 * b, xs) for b in range(Q // 2 + 1))
        assert np.allclose(got, ref, atol=1e-12)
    with pytest.raises(ValueError):
        chaos.chi_partial(np.zeros(2), np.array([[1.0, 0], [0, -1.0]]), 2)


def test_chi_partial_l2_error_decreases():
    rng = np.random.default_rng(9)
    G = np.array([[1.0, 0.3, 0.0], [0.3, 2.0, 0.1], [0.0, 0.1, 0.5]])
    xi = rng.multivariate_normal(np.zeros(3), G, size=20_000)
    errs = [np.mean((np.linalg.norm(xi, axis=1) - chaos.chi_partial(xi, G, Q)) ** 2) for Q in (0, 2, 4, 6)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_level_factor():
    assert chaos.level_factor(0.0, 3) == 1
    assert chaos.level_factor(1.0, 0) == pytest.approx(math.exp(-0.5))
    assert chaos.level_factor(1.0, 1) == 0


@given(st.floats(-3, 3))
def test_level_mean_is_kac_rice_at_level(t):
    spec = field.make_arw(1)
    quads = chaos.quadratures(geometry.TORUS2, 8)
    assert chaos.expected_length(spec, quads, level=t) == pytest.approx(
        math.exp(-t * t / 2) * math.pi / math.sqrt(2), rel=1e-12)


def test_statistic_tags(torus_quads):
    s = field.sample_field(field.make_arw(1), 1)
    st_ = chaos.chaos_q(s, 2, torus_quads, "lambda_form", level=0.5)
    assert (st_.q, st_.form, st_.resolution, st_.K, st_.level) == (2, "lambda_form", 32, 32, 0.5)
