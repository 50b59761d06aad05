"""Per-sample Wiener chaos components of the nodal length.

The q-th component is a double integral over the manifold and the unit
tangent circle,

    sum_{a+b=q/2} Theta(a,b)/s_n  int_M int_{S(T_x M)} H_2a(f) H_2b(<df,u>/|u|_f) |u|_f du dx,

with |u|_f = sqrt(g^f(u, u)) the norm induced by the gradient covariance.
Three algebraically equivalent forms are available (``general``,
``lambda_form``, ``inverse_form``); they differ only in fiber-quadrature
error.  The homothetic surrogate freezes the metric at its global averages.

Vectorized entry points take a coefficient matrix of shape (S, N) and
return one value per sample; the ``*_q`` wrappers operate on a single
:class:`~nodalchaos.field.FieldSample`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import field as fld
from . import geometry, specfun

FORMS = ("general", "lambda_form", "inverse_form")
MAX_Q = 12
# bound on S * P * K floats held at once
_CHUNK = 2_000_000


@dataclass(frozen=True)
class QuadratureSet:
    manifold: geometry.ManifoldQuadrature
    K: int = 32

    @property
    def resolution(self):
        return self.manifold.resolution


def quadratures(model, resolution, K=32):
    return QuadratureSet(geometry.build_manifold_quadrature(model, resolution), K)


@dataclass(frozen=True)
class ChaosStatistic:
    q: int
    value: float
    form: str
    resolution: int
    K: int
    level: float = 0.0


def level_factor(t, a):
    """exp(-t^2/2) H_2a(t) / H_2a(0): converts the (a, b) density from level 0 to t."""
    return math.exp(-t * t / 2) * float(specfun.hermite_eval(2 * a, float(t))) / specfun.hermite_at_zero(a)


def _check_q(q):
    if q % 2:
        raise ValueError(f"odd chaos components vanish; q must be even, got {q}")
    if not 0 <= q <= MAX_Q:
        raise ValueError(f"q must lie in [0, {MAX_Q}]")


def _chunks(nsamples, per_sample):
    step = max(1, _CHUNK // max(per_sample, 1))
    for lo in range(0, nsamples, step):
        yield slice(lo, min(lo + step, nsamples))


def _fiber(quads):
    nodes = quads.manifold.nodes
    ang = geometry.fiber_angles(nodes, quads.K)
    u = np.stack([np.cos(ang), np.sin(ang)], axis=-1)          # (P, K, 2)
    return u, specfun.sphere_area(1) / quads.K


def _fiber_terms(form, md, u, n):
    """Per-(node, direction) direction field d and weight w so that the fiber
    argument is <grad f, d> and the integrand weight is w (both (P, K[, 2]))."""
    if form == "general":
        norm = np.sqrt(np.einsum("pki,pij,pkj->pk", u, md.gf, u))
        return u / norm[..., None], norm
    if form == "lambda_form":
        lu = np.linalg.norm(np.einsum("pij,pkj->pki", md.Lam, u), axis=-1)
        return u * (math.sqrt(n) / lu)[..., None], lu / math.sqrt(n)
    if form == "inverse_form":
        li = np.einsum("pij,pkj->pki", md.Lam_inv, u)
        det = np.linalg.det(md.Lam)
        w = np.linalg.norm(li, axis=-1) ** (-(n + 1)) / det[:, None]
        return li * math.sqrt(n), w / math.sqrt(n)
    raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")


def chaos_values(spec, coeffs, q, quads, form="general", level=0.0):
    """q-th chaos component of the level-``level`` length for each coefficient row."""
    _check_q(q)
    coeffs = np.atleast_2d(coeffs)
    nodes, wx = quads.manifold.nodes, quads.manifold.weights
    n = spec.n
    md = fld.metric_data(spec, nodes)
    u, wf = _fiber(quads)
    d, wu = _fiber_terms(form, md, u, n)
    sn = specfun.sphere_area(n)
    if q == 0:
        val = float(level_factor(level, 0)) * float(wx @ wu.sum(axis=1)) * wf / sn
        return np.full(len(coeffs), val)
    J = fld.jet_matrix(spec, nodes)
    terms = specfun.splits(q)
    out = np.empty(len(coeffs))
    for sl in _chunks(len(coeffs), len(nodes) * quads.K):
        jets = np.einsum("pai,si->spa", J, coeffs[sl])
        f = jets[..., 0]
        xi = np.einsum("spi,pki->spk", jets[..., 1:], d)
        fiber = {b: np.einsum("spk,pk->sp", specfun.hermite_eval(2 * b, xi), wu) * wf
                 for _, b in terms}
        total = 0.0
        for a, b in terms:
            coef = float(specfun.theta(a, b)) * level_factor(level, a)
            total = total + coef * specfun.hermite_eval(2 * a, f) * fiber[b]
        out[sl] = total @ wx / sn
    return out


def expected_length(spec, quads, level=0.0):
    """Zeroth chaos component, i.e. the mean nodal length."""
    return float(chaos_values(spec, np.zeros((1, spec.size)), 0, quads, level=level)[0])


def _raw_jets(spec, coeffs, nodes):
    """Jets of the spectral sum phi (no pointwise normalization); (S, P, 3)."""
    return np.einsum("pai,si->spa", fld.basis_jet(spec, nodes), coeffs)


def sphere_hermite_integral(b, w, n):
    """int_{S^{n-1}} H_2b(<w, v>) dv in closed form, via the Laguerre identity."""
    r2 = np.sum(np.asarray(w) ** 2, axis=-1)
    return specfun.laguerre_eval(b, n / 2 - 1, r2 / 2) / specfun.c_dq(n, 2 * b)


def tilde_values(spec, coeffs, q, quads):
    """Homothetic surrogate: the metric replaced by the global sigma, lambda."""
    _check_q(q)
    coeffs = np.atleast_2d(coeffs)
    n = spec.n
    sigma, lam = math.sqrt(spec.sigma2), math.sqrt(spec.lam2)
    sn = specfun.sphere_area(n)
    nodes, wx = quads.manifold.nodes, quads.manifold.weights
    out = np.empty(len(coeffs))
    for sl in _chunks(len(coeffs), len(nodes) * 4):
        jets = _raw_jets(spec, coeffs[sl], nodes)
        f = jets[..., 0] / sigma
        w = jets[..., 1:] * (math.sqrt(n) / (lam * sigma))
        total = 0.0
        for a, b in specfun.splits(q):
            total = total + float(specfun.theta(a, b)) * specfun.hermite_eval(2 * a, f) \
                * sphere_hermite_integral(b, w, n)
        out[sl] = total @ wx * lam / (sn * math.sqrt(n))
    return out


def closed2_values(spec, coeffs, quad):
    """Second-component surrogate in closed form.

    Returns ``(by_quadrature, spectral)``: -lambda s_{n-1}/(2 s_n sqrt(n) sigma^2)
    (|phi|^2 - |grad phi|^2 / lambda^2), with the L2 norms either integrated on
    ``quad`` or read off the orthonormal coefficients.
    """
    coeffs = np.atleast_2d(coeffs)
    n = spec.n
    sigma2, lam2 = spec.sigma2, spec.lam2
    pref = -math.sqrt(lam2) * specfun.sphere_area(n - 1) / (2 * specfun.sphere_area(n) * math.sqrt(n)) / sigma2
    jets = _raw_jets(spec, coeffs, quad.nodes)
    diff = jets[..., 0] ** 2 - np.sum(jets[..., 1:] ** 2, axis=-1) / lam2
    by_quad = pref * (diff @ quad.weights)
    spectral = pref * (coeffs**2 @ (1.0 - spec.eigenvalues / lam2))
    return by_quad, spectral


def closed4_values(spec, coeffs, quad):
    """Fourth-component surrogate in its Hermite form.

    lambda s_{n-1}/(24 s_n sqrt(n)) int H_4(phi/s) - avg_v H_4(<w, v>)
    + (2/s) H_3(phi/s)(phi + Laplacian phi / lambda^2), with w = grad phi sqrt(n)/(lambda s),
    the circle average taken in closed form and the Laplacian taken spectrally.
    """
    coeffs = np.atleast_2d(coeffs)
    n = spec.n
    sigma, lam2 = math.sqrt(spec.sigma2), spec.lam2
    s = specfun.sphere_area(n - 1)
    pref = math.sqrt(lam2) * s / (24 * specfun.sphere_area(n) * math.sqrt(n))
    nodes = quad.nodes
    jets = _raw_jets(spec, coeffs, nodes)
    lap = fld.laplacian_values(spec, coeffs, nodes)
    phi = jets[..., 0]
    f = phi / sigma
    r2 = np.sum(jets[..., 1:] ** 2, axis=-1) * n / (lam2 * sigma**2)
    fiber_avg = 3 * r2**2 / (n * (n + 2)) - 6 * r2 / n + 3
    h3 = specfun.hermite_eval(3, f)
    integrand = specfun.hermite_eval(4, f) - fiber_avg + 2 / sigma * h3 * (phi + lap / lam2)
    return pref * (integrand @ quad.weights)


def _stat(q, value, form, quads, level=0.0):
    return ChaosStatistic(q, float(value), form, quads.resolution, quads.K, float(level))


def chaos_q(sample, q, quads, form="general", level=0.0):
    v = chaos_values(sample.spec, sample.coefficients, q, quads, form, level)[0]
    return _stat(q, v, form, quads, level)


def tilde_q(sample, q, quads):
    return _stat(q, tilde_values(sample.spec, sample.coefficients, q, quads)[0], "tilde", quads)


def closed2(sample, quad, tol=1e-10):
    """Closed-form second component; raises if quadrature and spectral forms disagree."""
    by_quad, spectral = closed2_values(sample.spec, sample.coefficients, quad)
    scale = max(1.0, abs(spectral[0]))
    if abs(by_quad[0] - spectral[0]) > tol * scale:
        raise ArithmeticError(f"closed2 quadrature {by_quad[0]!r} != spectral {spectral[0]!r}; "
                              "increase the resolution")
    return ChaosStatistic(2, float(spectral[0]), "closed2", quad.resolution, 0)


def closed4(sample, quad):
    return ChaosStatistic(4, float(closed4_values(sample.spec, sample.coefficients, quad)[0]),
                          "closed4", quad.resolution, 0)


def chi_partial(xi, G, Q, K=16):
    """Degree <= Q chaos partial sum of |xi| for xi ~ N(0, G).

    Term q is A(n, q) int_{S^{n-1}} H_q(<xi, v> / |v|_G) |v|_G dv with
    |v|_G = sqrt(v'Gv), integrated on a K-node sphere rule.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    G = np.atleast_2d(np.asarray(G, dtype=float))
    n = G.shape[0]
    if np.any(np.linalg.eigvalsh(G) <= 0):
        raise ValueError("G must be symmetric positive definite")
    if Q % 2:
        raise ValueError("Q must be even")
    pts, w = geometry.sphere_quadrature(n, K)
    norm = np.sqrt(np.einsum("ki,ij,kj->k", pts, G, pts))
    arg = (xi @ pts.T) / norm
    total = np.zeros(len(xi))
    for b in range(Q // 2 + 1):
        total += specfun.a_coeff(n, b) * (specfun.hermite_eval(2 * b, arg) * norm) @ w
    return total if total.size > 1 else float(total[0])
