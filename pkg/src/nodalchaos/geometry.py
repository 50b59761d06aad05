"""Model manifolds, tangent frames and quadrature rules.

Two closed surfaces are supported: the unit sphere S^2 in R^3 and the flat
torus R^2 / Z^2 (unit square chart).  Sphere chart points are
``(colatitude, longitude)``; the tangent frame at a point is the normalized
coordinate basis (e_theta, e_phi), undefined at the poles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import specfun

SPHERE = "sphere"
TORUS = "torus"

# colatitude clamp; the two excluded caps have area ~2*pi*eps^2, far below 1e-12 * 4*pi
POLE_EPS = 1e-6


class PoleError(ValueError):
    """Raised when a sphere frame is requested at (or numerically near) a pole."""


@dataclass(frozen=True)
class ManifoldModel:
    kind: str
    n: int = 2

    def __post_init__(self):
        if self.kind not in (SPHERE, TORUS):
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if self.n != 2:
            raise ValueError("only surfaces (n = 2) are simulated")

    @property
    def volume(self):
        return 4 * math.pi if self.kind == SPHERE else 1.0

    @property
    def is_sphere(self):
        return self.kind == SPHERE


SPHERE2 = ManifoldModel(SPHERE)
TORUS2 = ManifoldModel(TORUS)


def manifold(kind):
    return SPHERE2 if kind == SPHERE else ManifoldModel(kind)


@dataclass(frozen=True, eq=False)
class ManifoldQuadrature:
    model: ManifoldModel
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    resolution: int = 0

    def integrate(self, values, axis=-1):
        return np.tensordot(values, self.weights, axes=([axis], [0]))

    @property
    def size(self):
        return len(self.weights)


def build_manifold_quadrature(model, resolution):
    """Product quadrature on the manifold.

    Parameters
    ----------
    model : ManifoldModel
    resolution : int
        Torus: ``resolution**2`` uniform nodes (exact for trigonometric
        polynomials of degree < resolution in each variable).  Sphere:
        ``resolution`` Gauss-Legendre nodes in cos(colatitude) times
        ``2 * resolution`` uniform longitudes (exact for spherical
        polynomials of degree < 2 * resolution).

    Returns
    -------
    ManifoldQuadrature
    """
    if resolution < 4:
        raise ValueError(f"resolution must be >= 4, got {resolution}")
    if model.kind == TORUS:
        g = np.arange(resolution) / resolution
        x1, x2 = np.meshgrid(g, g, indexing="ij")
        nodes = np.column_stack([x1.ravel(), x2.ravel()])
        weights = np.full(resolution * resolution, 1.0 / resolution**2)
    else:
        z, wz = np.polynomial.legendre.leggauss(resolution)
        nphi = 2 * resolution
        phi = 2 * np.pi * np.arange(nphi) / nphi
        th, ph = np.meshgrid(np.arccos(z), phi, indexing="ij")
        nodes = np.column_stack([th.ravel(), ph.ravel()])
        weights = np.repeat(wz * (2 * np.pi / nphi), nphi)
    return ManifoldQuadrature(model, nodes, weights, resolution)


def embed(points):
    """Sphere chart points (colatitude, longitude) -> unit vectors in R^3."""
    points = np.asarray(points, dtype=float)
    th, ph = points[..., 0], points[..., 1]
    st = np.sin(th)
    return np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1)


def chart_from_embedding(xyz):
    xyz = np.asarray(xyz, dtype=float)
    th = np.arccos(np.clip(xyz[..., 2], -1.0, 1.0))
    ph = np.mod(np.arctan2(xyz[..., 1], xyz[..., 0]), 2 * np.pi)
    return np.stack([th, ph], axis=-1)


def sphere_frames(points):
    """Orthonormal tangent frames (e_theta, e_phi) as R^3 vectors, shape (..., 2, 3)."""
    points = np.asarray(points, dtype=float)
    th, ph = points[..., 0], points[..., 1]
    if np.any(np.sin(th) < 0.5 * POLE_EPS):
        raise PoleError("sphere frame undefined at a pole; rotate the chart so the point "
                        "lies away from the poles")
    ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
    e_th = np.stack([ct * cp, ct * sp, -st], axis=-1)
    e_ph = np.stack([-sp, cp, np.zeros_like(ph)], axis=-1)
    return np.stack([e_th, e_ph], axis=-2)


@dataclass(frozen=True, eq=False)
class FiberQuadrature:
    K: int
    directions: np.ndarray = field(repr=False)
    weight: float = 0.0


def fiber_offset(points, K):
    """Deterministic per-point angular offset in [0, 2*pi/K)."""
    points = np.asarray(points, dtype=float)
    frac = np.mod(math.sqrt(2) * points[..., 0] + math.sqrt(3) * points[..., 1], 1.0)
    return 2 * np.pi / K * frac


def fiber_angles(points, K, offset=True):
    """Fiber angles theta_j + theta0(x), shape ``points.shape[:-1] + (K,)``."""
    points = np.asarray(points, dtype=float)
    base = 2 * np.pi * np.arange(K) / K
    if not offset:
        return np.broadcast_to(base, points.shape[:-1] + (K,))
    return base + fiber_offset(points, K)[..., None]


def fiber_directions(model, x, K):
    """K equally spaced unit directions in the orthonormal frame at ``x``.

    Weight per node is s_1 / K = 2*pi / K.  Trigonometric polynomials in the
    fiber angle of degree < K are integrated exactly.
    """
    if K < 1:
        raise ValueError("K must be positive")
    x = np.asarray(x, dtype=float)
    if model.kind == SPHERE:
        sphere_frames(x)  # pole check
    ang = fiber_angles(x, K)
    dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    return FiberQuadrature(K, dirs, specfun.sphere_area(1) / K)


def sphere_quadrature(n, K):
    """Quadrature on the unit sphere S^{n-1} in R^n, n = 1..4.

    Exact for polynomials in the coordinates of degree < K (n >= 2).

    Returns
    -------
    points : ndarray, shape (M, n)
    weights : ndarray, shape (M,)
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        ang = 2 * np.pi * np.arange(K) / K
        return np.column_stack([np.cos(ang), np.sin(ang)]), np.full(K, 2 * np.pi / K)
    if n == 3:
        z, wz = np.polynomial.legendre.leggauss(K)
        nphi = 2 * K
        phi = 2 * np.pi * np.arange(nphi) / nphi
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        r = np.sqrt(1 - zz**2)
        pts = np.stack([r * np.cos(pp), r * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        return pts, np.repeat(wz * (2 * np.pi / nphi), nphi)
    if n == 4:
        # v = (cos e cos a, cos e sin a, sin e cos b, sin e sin b), t = sin^2 e,
        # surface measure = dt da db / 2
        t, wt = np.polynomial.legendre.leggauss(K)
        t, wt = (t + 1) / 2, wt / 2
        ang = 2 * np.pi * np.arange(K) / K
        tt, aa, bb = np.meshgrid(t, ang, ang, indexing="ij")
        c, s = np.sqrt(1 - tt), np.sqrt(tt)
        pts = np.stack([c * np.cos(aa), c * np.sin(aa), s * np.cos(bb), s * np.sin(bb)],
                       axis=-1).reshape(-1, 4)
        w = np.repeat(wt / 2 * (2 * np.pi / K) ** 2, K * K)
        return pts, w
    raise ValueError("sphere quadrature implemented for n <= 4")


def _battery():
    return [
        ("one", lambda w: np.ones(len(w))),
        ("w1^2", lambda w: w[:, 0] ** 2),
        ("w1*w2", lambda w: w[:, 0] * w[:, 1]),
        ("w2^4", lambda w: w[:, 1] ** 4),
        ("w1^2*w2^2+w1", lambda w: w[:, 0] ** 2 * w[:, 1] ** 2 + w[:, 0]),
    ]


def sphere_change_check(L, K, battery=None):
    """Max deviation in the circle change-of-variables identity.

    Checks int h(v / |L^{-1} v|) dv = int h(L u) |det L| / |L u|^2 du on S^1
    for a battery of polynomial ``h`` using K-node trapezoid rules.
    """
    L = np.asarray(L, dtype=float)
    det = np.linalg.det(L)
    if abs(det) < 1e-14 * max(1.0, np.abs(L).max() ** 2):
        raise ValueError("singular matrix")
    pts, w = sphere_quadrature(2, K)
    Linv = np.linalg.inv(L)
    lhs_pts = pts / np.linalg.norm(pts @ Linv.T, axis=1)[:, None]
    Lu = pts @ L.T
    jac = abs(det) / np.linalg.norm(Lu, axis=1) ** 2
    worst = 0.0
    for _, h in battery or _battery():
        lhs = w @ h(lhs_pts)
        rhs = w @ (h(Lu) * jac)
        worst = max(worst, abs(lhs - rhs))
    return worst


def intsph_H4(x, n):
    """Closed form of int_{S^{n-1}} H_4(<x, v>) dv."""
    r2 = float(np.dot(x, x))
    return (3 * r2**2 / (n * (n + 2)) - 6 * r2 / n + 3) * specfun.sphere_area(n - 1)


def spherical_moment_suite(n, A, x, K=256):
    """Closed-form sphere integrals against their quadrature counterparts.

    ``x`` doubles as X and ``A @ x`` as Y in the mixed cubic moment.  With
    ``K=None`` only the closed forms are returned.

    Returns
    -------
    dict
        name -> {"closed": float, "quadrature": float or None, "deviation": float or None}
    """
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    y = A @ x
    s = specfun.sphere_area(n - 1)
    b4 = specfun.beta_const(n, 4)
    AtA = A.T @ A
    r = float(np.linalg.norm(x))
    closed = {}
    for q in (0, 2, 4, 6):
        closed[f"proj^{q}"] = r**q * specfun.beta_const(n, q)
    closed["bilinear^2"] = s**2 / n**2 * np.trace(AtA)
    closed["|Av|^4"] = 2 / 3 * np.trace(AtA @ AtA) * b4 + np.trace(AtA) ** 2 * b4 / 3
    closed["cubic*linear"] = r**2 * float(x @ y) * b4
    closed["H4"] = intsph_H4(x, n)

    quad = dict.fromkeys(closed)
    if K is not None:
        pts, w = sphere_quadrature(n, K)
        px = pts @ x
        for q in (0, 2, 4, 6):
            quad[f"proj^{q}"] = w @ px**q
        bil = (pts @ A) @ pts.T
        quad["bilinear^2"] = w @ (bil**2) @ w
        quad["|Av|^4"] = w @ np.sum((pts @ A.T) ** 2, axis=1) ** 2
        quad["cubic*linear"] = w @ (px**3 * (pts @ y))
        quad["H4"] = w @ specfun.hermite_eval(4, px)
    return {k: {"closed": float(closed[k]),
                "quadrature": None if quad[k] is None else float(quad[k]),
                "deviation": None if quad[k] is None else float(abs(quad[k] - closed[k]))}
            for k in closed}
