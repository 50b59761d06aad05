import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nodalchaos import field, geometry, specfun


def test_manifold_models():
    assert geometry.SPHERE2.volume == pytest.approx(4 * math.pi)
    assert geometry.TORUS2.volume == 1.0
    with pytest.raises(ValueError):
        geometry.ManifoldModel("klein")


def test_torus_quadrature():
    q = geometry.build_manifold_quadrature(geometry.TORUS2, 8)
    assert q.size == 64
    assert np.all(q.weights == 1 / 64)
    with pytest.raises(ValueError):
        geometry.build_manifold_quadrature(geometry.TORUS2, 3)


@pytest.mark.parametrize("res", [4, 9, 32])
def test_sphere_quadrature_volume(res):
    q = geometry.build_manifold_quadrature(geometry.SPHERE2, res)
    assert abs(q.weights.sum() - 4 * math.pi) <= 1e-12 * 4 * math.pi


def test_spherical_harmonics_orthonormal():
    spec = field.make_band("sphere", list(range(21)), normalized=False)
    q = geometry.build_manifold_quadrature(geometry.SPHERE2, 64)
    B = field.basis_jet(spec, q.nodes, derivatives=False)
    gram = (B * q.weights[:, None]).T @ B
    assert np.abs(gram - np.eye(spec.size)).max() < 1e-10


def test_torus_quadrature_exact_for_quartic_products():
    spec = field.make_band("torus", [1, 2, 4], normalized=False)
    q = geometry.build_manifold_quadrature(geometry.TORUS2, 4 * 2 + 1)
    B = field.basis_jet(spec, q.nodes, derivatives=False)
    fine = geometry.build_manifold_quadrature(geometry.TORUS2, 64)
    Bf = field.basis_jet(spec, fine.nodes, derivatives=False)
    for idx in ((0, 1, 2, 3), (0, 0, 4, 4), (1, 5, 6, 7)):
        coarse = q.weights @ np.prod(B[:, idx], axis=1)
        ref = fine.weights @ np.prod(Bf[:, idx], axis=1)
        assert coarse == pytest.approx(ref, abs=1e-12)


def test_fiber_directions():
    x = np.array([0.3, 0.7])
    fq = geometry.fiber_directions(geometry.TORUS2, x, 4)
    d = fq.directions
    quarter_turns = np.array([[1, 0, -1, 0], [0, 1, 0, -1], [-1, 0, 1, 0], [0, -1, 0, 1]])
    assert np.allclose(d @ d.T, quarter_turns, atol=1e-14)
    assert fq.weight == pytest.approx(math.pi / 2)
    w = np.array([0.7, -1.3])
    fq = geometry.fiber_directions(geometry.TORUS2, x, 8)
    assert fq.weight * np.sum((fq.directions @ w) ** 2) == pytest.approx(math.pi * w @ w, rel=1e-14)
    fq = geometry.fiber_directions(geometry.TORUS2, x, 16)
    h4 = fq.weight * np.sum(specfun.hermite_eval(4, fq.directions @ w))
    r2 = w @ w
    assert h4 == pytest.approx((3 / 8 * r2**2 - 3 * r2 + 3) * 2 * math.pi, abs=1e-12)
    assert h4 == pytest.approx(geometry.intsph_H4(w, 2), abs=1e-12)


def test_fiber_directions_reject_poles():
    with pytest.raises(geometry.PoleError):
        geometry.fiber_directions(geometry.SPHERE2, np.array([0.0, 1.0]), 8)


def test_fiber_offset_in_range():
    pts = np.random.default_rng(0).uniform(0, 3, size=(100, 2))
    off = geometry.fiber_offset(pts, 16)
    assert np.all((off >= 0) & (off < 2 * math.pi / 16))


def test_sphere_change_examples():
    assert geometry.sphere_change_check(np.eye(2), 64) <= 1e-14
    assert geometry.sphere_change_check(np.diag([2.0, 2.0]), 64,
                                        battery=[("one", lambda w: np.ones(len(w)))]) <= 1e-12
    assert geometry.sphere_change_check(np.diag([2.0, 1.0]), 256,
                                        battery=[("v1^2", lambda w: w[:, 0] ** 2)]) <= 1e-8
    with pytest.raises(ValueError):
        geometry.sphere_change_check(np.array([[1.0, 2.0], [2.0, 4.0]]), 64)


def test_moment_suite_examples():
    rep = geometry.spherical_moment_suite(2, np.eye(2), np.zeros(2), K=None)
    assert rep["proj^0"]["closed"] == pytest.approx(2 * math.pi)
    for q in (2, 4, 6):
        assert rep[f"proj^{q}"]["closed"] == 0
    assert rep["|Av|^4"]["closed"] == pytest.approx(2 * math.pi)
    rep = geometry.spherical_moment_suite(2, np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([1.0, 0.0]))
    # A x = (0, -1) is orthogonal to x
    assert rep["cubic*linear"]["closed"] == 0
    assert rep["cubic*linear"]["deviation"] < 1e-14


def test_moment_suite_random_matrices():
    rng = np.random.default_rng(11)
    for n in (2, 3, 4):
        for _ in range(20 if n < 4 else 4):
            A = rng.uniform(-2, 2, size=(n, n))
            x = rng.uniform(-2, 2, size=n)
            rep = geometry.spherical_moment_suite(n, A, x, K=256 if n == 2 else 24)
            for name, r in rep.items():
                assert r["deviation"] <= 1e-8 * max(1, abs(r["closed"])), name


def test_sphere_frames_smooth():
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(10):
        p = np.array([rng.uniform(0.3, 2.8), rng.uniform(0, 2 * math.pi)])
        d = rng.normal(size=2)
        d /= np.linalg.norm(d)
        F0 = geometry.sphere_frames(p)
        F1 = geometry.sphere_frames(p + h * d)
        assert np.abs(F1 - F0).max() < 10 * h


@given(st.floats(0.01, math.pi - 0.01), st.floats(0, 2 * math.pi - 1e-9))
def test_embedding_roundtrip(th, ph):
    back = geometry.chart_from_embedding(geometry.embed(np.array([th, ph])))
    assert back[0] == pytest.approx(th, abs=1e-9)
    assert math.cos(back[1] - ph) == pytest.approx(1, abs=1e-9)


def test_sphere_quadrature_exactness():
    for n in (2, 3, 4):
        pts, w = geometry.sphere_quadrature(n, 10)
        assert w.sum() == pytest.approx(specfun.sphere_area(n - 1), rel=1e-13)
        assert w @ pts[:, -1] ** 6 == pytest.approx(specfun.beta_const(n, 6), rel=1e-12)
