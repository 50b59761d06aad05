"""Exact variances, the 2^q covariance bound and closed forms for q = 2, 4.

All double integrals over M x M go through :func:`pair_rule`, which exploits
stationarity (torus: one integral over the displacement) or isotropy
(sphere: one integral over the angle between the points) when the field
spec has that symmetry, and falls back to the full product rule otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chaos, geometry, specfun
from . import field as fld

_CHUNK = 4_000_000


class ClosedFormError(ValueError):
    """A closed-form variance was requested for a spec outside its assumptions."""


@dataclass
class VarianceReport:
    q: int
    var_exact: float
    var_bound: float
    var_mc: float = float("nan")
    var_mc_se: float = float("nan")
    notes: list = field(default_factory=list)


def pair_rule(spec, resolution, full=False):
    """Nodes (x_i, y_i) and weights w_i with sum_i w_i F(x_i, y_i) ~ int int F dx dy.

    Parameters
    ----------
    spec : SpectralFieldSpec
    resolution : int
        Manifold quadrature resolution (sphere isotropic case: number of
        Gauss-Legendre nodes in the cosine of the angle).
    full : bool
        Ignore symmetries and return the full product rule.

    Returns
    -------
    x, y : ndarray, shape (M, 2)
    w : ndarray, shape (M,)
    """
    model = spec.manifold
    sym = None if full else spec.symmetry
    if sym == "stationary":
        quad = geometry.build_manifold_quadrature(model, resolution)
        y = np.zeros_like(quad.nodes)
        return quad.nodes, y, quad.weights * model.volume
    if sym == "isotropic":
        t, wt = np.polynomial.legendre.leggauss(resolution)
        psi = np.arccos(t)
        # both points on the equator: frames stay regular
        x = np.column_stack([np.full_like(psi, np.pi / 2), psi])
        y = np.tile([np.pi / 2, 0.0], (len(psi), 1))
        return x, y, wt * (2 * np.pi) * model.volume
    quad = geometry.build_manifold_quadrature(model, resolution)
    P = quad.size
    ix, iy = np.meshgrid(np.arange(P), np.arange(P), indexing="ij")
    return quad.nodes[ix.ravel()], quad.nodes[iy.ravel()], np.outer(quad.weights, quad.weights).ravel()


def _chunked(M, per):
    step = max(1, _CHUNK // max(per, 1))
    for lo in range(0, M, step):
        yield slice(lo, min(lo + step, M))


def cov_density(jc, mx, my, u, v, a, b, a2, b2):
    """Covariance density of the (a, b) and (a2, b2) bi-chaotic measures.

    Half-degrees: the Hermite degrees are 2a, 2b, 2a2, 2b2.  ``u`` and ``v``
    are unit frame vectors at x and y; all array arguments broadcast.
    Returns Theta(a,b) Theta(a2,b2) / s_n^2 * |u|_f |v|_f * E[H_2a H_2b H_2a2 H_2b2]
    with the Hermite arguments f(x), <df_x, u>/|u|_f, f(y), <df_y, v>/|v|_f.
    """
    if a + b != a2 + b2:
        return np.zeros(np.broadcast_shapes(np.shape(jc.c), np.shape(u)[:-1], np.shape(v)[:-1]))
    nu = np.sqrt(np.einsum("...i,...ij,...j->...", u, mx.gf, u))
    nv = np.sqrt(np.einsum("...i,...ij,...j->...", v, my.gf, v))
    c13 = jc.c
    c14 = np.einsum("...i,...i->...", jc.cpy, v) / nv
    c23 = np.einsum("...i,...i->...", jc.cpx, u) / nu
    c24 = np.einsum("...i,...ij,...j->...", u, jc.cpp, v) / (nu * nv)
    n = u.shape[-1]
    coef = float(specfun.theta(a, b) * specfun.theta(a2, b2)) / specfun.sphere_area(n) ** 2
    return coef * nu * nv * specfun.diagram4(2 * a, 2 * b, 2 * a2, 2 * b2, c13, c14, c23, c24)


def _fiber_dirs(points, K):
    ang = geometry.fiber_angles(points, K)
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


def _check_even(q, minimum=0):
    if q % 2 or q < minimum:
        raise ValueError(f"q must be even and >= {minimum}, got {q}")


def var_exact(spec, q, resolution, K=32, full=False):
    """Var of the q-th chaos component by quadrature of the diagram formula."""
    _check_even(q, 2)
    x, y, w = pair_rule(spec, resolution, full)
    terms = specfun.splits(q)
    wf = (specfun.sphere_area(1) / K) ** 2
    total = 0.0
    for sl in _chunked(len(w), K * K * 8):
        xs, ys = x[sl], y[sl]
        jc = fld.JetCovariance.from_block(fld.cov_block(spec, xs, ys))
        mx, my = fld.metric_data(spec, xs), fld.metric_data(spec, ys)
        u = _fiber_dirs(xs, K)[:, :, None, :]      # (M, K, 1, 2)
        v = _fiber_dirs(ys, K)[:, None, :, :]      # (M, 1, K, 2)
        jcb = fld.JetCovariance(jc.c[:, None, None], jc.cpx[:, None, None], jc.cpy[:, None, None],
                                jc.cpp[:, None, None])
        mxb = fld.MetricData(mx.gf[:, None, None], None, None, None, None)
        myb = fld.MetricData(my.gf[:, None, None], None, None, None, None)
        dens = 0.0
        for a, b in terms:
            for a2, b2 in terms:
                dens = dens + cov_density(jcb, mxb, myb, u, v, a, b, a2, b2)
        total += float(w[sl] @ dens.sum(axis=(1, 2))) * wf
    return total


def var_bound(spec, q, resolution, full=False):
    """2^q int int lambda(f,x) lambda(f,y) / n * jet_norm(x, y)^q dx dy.

    The supremum over fiber directions inside the jet norm is evaluated in
    closed form (vector norms and largest singular value).
    """
    _check_even(q)
    x, y, w = pair_rule(spec, resolution, full)
    total = 0.0
    for sl in _chunked(len(w), 64):
        jc = fld.cov_jet(spec, x[sl], y[sl])
        mx, my = fld.metric_data(spec, x[sl]), fld.metric_data(spec, y[sl])
        integrand = mx.lambda_x * my.lambda_x / spec.n * fld.jet_norm(jc, mx, my) ** q
        total += float(w[sl] @ integrand)
    return 2.0**q * total


def l_operator_cov(spec, x, y, which="first"):
    """C(x, y) with L = 1 + Laplacian / lambda^2 applied in the first, second or both variables."""
    lx = which in ("first", "both")
    ly = which in ("second", "both")
    if which not in ("first", "second", "both"):
        raise ValueError(f"which must be first, second or both; got {which!r}")
    J = fld.cov_block(spec, x, y, lx, ly)
    c = J[..., 0, 0]
    return float(c[0]) if np.ndim(x) == 1 and np.ndim(y) == 1 else c


def _require_homothetic(spec):
    if spec.normalization != fld.UNIT or spec.pointwise_normalized:
        raise ClosedFormError("closed-form variance needs a constant unit-variance spec")
    if not fld.is_homothetic(spec):
        raise ClosedFormError("closed-form variance needs a homothetic field "
                              "(gradient covariance proportional to the metric)")


def var2_closed(spec, resolution, K=32):
    """(E L)^2 / (2 vol^2) * int int L2C * L1C for homothetic fields on closed manifolds."""
    _require_homothetic(spec)
    mean = chaos.expected_length(spec, chaos.quadratures(spec.manifold, max(resolution, 8), K))
    x, y, w = pair_rule(spec, resolution)
    l1 = fld.cov_block(spec, x, y, lx=True)[..., 0, 0]
    l2 = fld.cov_block(spec, x, y, ly=True)[..., 0, 0]
    vol = spec.manifold.volume
    return mean**2 / (2 * vol**2) * float(w @ (l1 * l2))


def var4_integrand(spec, x, y):
    """Pair integrand E[Z(x) Z(y)] of the fourth-component closed form, where
    L[4] = lambda s_{n-1} / (24 s_n sqrt(n)) int Z."""
    n = spec.n
    lam2 = spec.lam2
    s = specfun.sphere_area(n - 1)
    b4 = specfun.beta_const(n, 4)
    J = fld.cov_block(spec, x, y)
    Jl2 = fld.cov_block(spec, x, y, ly=True)
    Jl1 = fld.cov_block(spec, x, y, lx=True)
    Jll = fld.cov_block(spec, x, y, lx=True, ly=True)
    C = J[..., 0, 0]
    cpx, cpy = J[..., 1:, 0], J[..., 0, 1:]
    A = n / lam2 * J[..., 1:, 1:]
    AtA = np.swapaxes(A, -1, -2) @ A
    trA = np.trace(AtA, axis1=-2, axis2=-1)
    trA2 = np.trace(AtA @ AtA, axis1=-2, axis2=-1)
    l2c, l1c, llc = Jl2[..., 0, 0], Jl1[..., 0, 0], Jll[..., 0, 0]
    l2cpx = Jl2[..., 1:, 0]
    g = (n / lam2) ** 2
    ncpx2 = np.sum(cpx**2, axis=-1)
    return (24 * C**4
            + 24 / (3 * s**2) * b4**2 * (2 * trA2 + trA**2)
            - 2 * 24 / s * g * b4 * np.sum(cpy**2, axis=-1) ** 2
            + 4 * 36 * (C**2 * l2c * l1c / 2 + C**3 * llc / 6)
            + 4 * 24 * C**3 * l2c
            - 4 * 24 / s * g * b4 * ncpx2 * np.sum(cpx * l2cpx, axis=-1))


def var4_closed(spec, resolution):
    """Variance of the fourth component for homothetic fields on closed manifolds."""
    _require_homothetic(spec)
    n = spec.n
    x, y, w = pair_rule(spec, resolution)
    pref = math.sqrt(spec.lam2) * specfun.sphere_area(n - 1) / (24 * specfun.sphere_area(n) * math.sqrt(n))
    return pref**2 * float(w @ var4_integrand(spec, x, y))


@dataclass
class BerryReport:
    sigma2: float
    lam2: float
    var_mu: float
    lhs: float
    spectral_term: float
    exact_term: float
    prefactor: float
    eps: float = 0.0

    @property
    def ratio(self):
        return self.lhs / self.spectral_term if self.spectral_term else float("nan")

    @property
    def exact_ratio(self):
        return self.lhs / self.exact_term if self.exact_term else float("nan")


def berry_report(spec, resolution=32):
    """Second-component variance of a band random wave against its spectral spread.

    ``lhs`` is Var(L[2] / lambda).  With P = s_{n-1} / (2 s_n sqrt(n)),
    sigma^2 = dim / vol and Var(mu) = sum_i (lambda_i^2 - lambda^2)^2 / sigma^2,
    ``spectral_term`` is P / sigma^2 * Var(mu) / lambda^4 and ``exact_term``
    is 2 P^2 / sigma^2 * Var(mu) / lambda^4, the value obtained by direct
    computation of the variance on a closed manifold.
    """
    n = spec.n
    active = [m for m in spec.modes if m.std > 0]
    ev = np.array([m.eigenvalue for m in active])
    vol = spec.manifold.volume
    sigma2 = len(active) / vol
    lam2 = float(ev[0]) if np.all(ev == ev[0]) else float(ev.mean())
    var_mu = float(np.sum((ev - lam2) ** 2)) / sigma2
    pref = specfun.sphere_area(n - 1) / (2 * specfun.sphere_area(n) * math.sqrt(n))
    spectral = pref / sigma2 * var_mu / lam2**2
    exact = 2 * pref**2 / sigma2 * var_mu / lam2**2
    unit = spec if spec.normalization == fld.UNIT else fld.normalize(spec)
    lhs = var2_closed(unit, resolution) / unit.lam2
    return BerryReport(sigma2, lam2, var_mu, lhs, spectral, exact, pref)
