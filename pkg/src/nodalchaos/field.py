"""Spectral Gaussian fields on the sphere and the flat torus.

A field is a finite Karhunen-Loeve sum ``phi = sum_i std_i * g_i * phi_i`` over
L2-orthonormal Laplace eigenfunctions ``phi_i`` with i.i.d. standard normal
``g_i``.  Torus modes are ``sqrt(2) cos(2 pi k.x)``, ``sqrt(2) sin(2 pi k.x)``
(and the constant 1); sphere modes are fully normalized real spherical
harmonics.

Jets are expressed in the orthonormal frame of :mod:`nodalchaos.geometry`.
A jet covariance is the 3x3 block ``E[j(x) j(y)^T]`` with ``j = (f, d1 f, d2 f)``;
its pieces are named ``c = C(x, y)``, ``cpx = E[df_x f(y)]`` (frame at x),
``cpy = E[f(x) df_y]`` (frame at y) and ``cpp = E[df_x df_y^T]``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry, specfun
from .geometry import SPHERE, TORUS

SCHEMA_VERSION = 1
RAW = "raw"
UNIT = "unit-variance"


class DegenerateFieldError(ValueError):
    """The gradient covariance (Adler-Taylor metric) is not positive definite."""


@dataclass(frozen=True)
class Mode:
    """One eigenfunction: label, Laplace eigenvalue (lambda_i^2) and coefficient std."""

    label: tuple
    eigenvalue: float
    std: float


@dataclass(frozen=True, eq=False)
class SpectralFieldSpec:
    manifold: geometry.ManifoldModel
    modes: tuple
    normalization: str = RAW

    def __post_init__(self):
        if self.normalization not in (RAW, UNIT):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if not self.modes or not any(m.std > 0 for m in self.modes):
            raise ValueError("a field needs at least one mode with positive std")
        for m in self.modes:
            if m.std < 0 or m.eigenvalue < 0:
                raise ValueError(f"invalid mode {m}")
            _check_label(self.manifold.kind, m.label)

    @property
    def n(self):
        return self.manifold.n

    @property
    def size(self):
        return len(self.modes)

    @property
    def stds(self):
        return np.array([m.std for m in self.modes])

    @property
    def eigenvalues(self):
        return np.array([m.eigenvalue for m in self.modes])

    @property
    def symmetry(self):
        """'stationary' (torus), 'isotropic' (sphere) or None."""
        return _symmetry(self)

    @property
    def pointwise_normalized(self):
        return self.normalization == UNIT and self.symmetry is None

    @property
    def sigma2(self):
        """Spatial mean of E phi(x)^2 for the spectral sum (no pointwise normalization)."""
        return float(np.sum(self.stds**2)) / self.manifold.volume

    @property
    def lam2(self):
        """Mean squared frequency: mean E|d phi|^2 divided by mean E phi^2."""
        ev = self.eigenvalues
        if np.all(ev == ev[0]):
            # keeps 1 - lambda_i^2 / lambda^2 exactly zero for single-eigenvalue specs
            return float(ev[0])
        s2 = self.stds**2
        return float(s2 @ ev / s2.sum())

    def l_multipliers(self):
        """Spectral action of L = 1 + Laplacian / lambda^2 on each mode."""
        return 1.0 - self.eigenvalues / self.lam2

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "manifold": self.manifold.kind,
            "normalization": self.normalization,
            "modes": [{"label": list(m.label), "eigenvalue": m.eigenvalue, "std": m.std}
                      for m in self.modes],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def spec_from_dict(d):
    keys = {"schema_version", "manifold", "normalization", "modes"}
    unknown = set(d) - keys
    if unknown:
        raise ValueError(f"unknown field spec keys: {sorted(unknown)}")
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported field spec schema {d.get('schema_version')!r}")
    modes = []
    for m in d["modes"]:
        if set(m) != {"label", "eigenvalue", "std"}:
            raise ValueError(f"bad mode entry {m}")
        label = tuple([m["label"][0]] + [int(v) for v in m["label"][1:]])
        modes.append(Mode(label, float(m["eigenvalue"]), float(m["std"])))
    return SpectralFieldSpec(geometry.manifold(d["manifold"]), tuple(modes), d["normalization"])


def spec_from_json(text):
    return spec_from_dict(json.loads(text))


def _check_label(kind, label):
    if kind == TORUS:
        ok = (label[0] == "const" and len(label) == 1) or (
            label[0] in ("cos", "sin") and len(label) == 3)
    else:
        ok = label[0] == "Y" and len(label) == 3 and abs(label[2]) <= label[1]
    if not ok:
        raise ValueError(f"mode label {label!r} invalid on {kind}")


def _symmetry(spec):
    if spec.manifold.kind == TORUS:
        cos, sin = {}, {}
        for m in spec.modes:
            if m.label[0] == "cos":
                cos[m.label[1:]] = m.std
            elif m.label[0] == "sin":
                sin[m.label[1:]] = m.std
        return "stationary" if cos == sin else None
    by_l = {}
    for m in spec.modes:
        by_l.setdefault(m.label[1], {})[m.label[2]] = m.std
    for ell, ms in by_l.items():
        if set(ms) != set(range(-ell, ell + 1)) or len(set(ms.values())) != 1:
            return None
    return "isotropic"


def _groups(spec):
    """Covariance weights of a stationary/isotropic spec.

    Torus: {k: w} with C = sum_k w cos(2 pi k.(x-y)) over the half lattice (k = 0 is
    the constant).  Sphere: {l: w} with C = sum_l w P_l(<x, y>).
    """
    out = {}
    if spec.manifold.kind == TORUS:
        for m in spec.modes:
            if m.label[0] == "const":
                out[(0, 0)] = out.get((0, 0), 0.0) + m.std**2
            elif m.label[0] == "cos":
                # cos/sin pair: 2 s^2 (cos a cos b + sin a sin b)
                k = m.label[1:]
                out[k] = out.get(k, 0.0) + 2 * m.std**2
    else:
        for m in spec.modes:
            ell = m.label[1]
            if m.label[2] == 0:
                out[ell] = out.get(ell, 0.0) + m.std**2 * (2 * ell + 1) / (4 * math.pi)
    return out


def _group_eigenvalue(kind, key):
    if kind == TORUS:
        return 4 * math.pi**2 * (key[0] ** 2 + key[1] ** 2)
    return float(key * (key + 1))


# -- construction ---------------------------------------------------------------

def lattice_points(m):
    """E_m = {k in Z^2 : |k|^2 = m}, sorted."""
    r = math.isqrt(m)
    return sorted((a, b) for a in range(-r, r + 1) for b in range(-r, r + 1) if a * a + b * b == m)


def _half(points):
    return [k for k in points if k[0] > 0 or (k[0] == 0 and k[1] > 0)]


def _torus_pair(k, std):
    ev = 4 * math.pi**2 * (k[0] ** 2 + k[1] ** 2)
    return [Mode(("cos", k[0], k[1]), ev, std), Mode(("sin", k[0], k[1]), ev, std)]


def normalize(spec):
    """Unit-variance version of ``spec``.

    Constant-variance specs are rescaled through their stds; otherwise stds are
    scaled to unit mean variance and each evaluation divides by sqrt(E phi(x)^2).
    """
    scale = 1.0 / math.sqrt(spec.sigma2)
    modes = tuple(Mode(m.label, m.eigenvalue, m.std * scale) for m in spec.modes)
    return SpectralFieldSpec(spec.manifold, modes, UNIT)


def make_band(manifold, levels, weights=None, normalized=True):
    """Union of full eigenspaces.

    ``levels`` are degrees l on the sphere and lattice norms m = |k|^2 on the torus;
    ``weights`` (default 1) are the per-mode coefficient variances of each level.
    """
    if not levels:
        raise ValueError("empty eigenvalue list")
    if isinstance(manifold, str):
        manifold = geometry.manifold(manifold)
    weights = [1.0] * len(levels) if weights is None else list(weights)
    modes = []
    for lev, w in zip(levels, weights):
        std = math.sqrt(w)
        if manifold.kind == SPHERE:
            if lev < 0:
                raise ValueError("sphere degree must be >= 0")
            modes += [Mode(("Y", lev, m), float(lev * (lev + 1)), std)
                      for m in range(-lev, lev + 1)]
        else:
            pts = lattice_points(lev)
            if not pts:
                raise ValueError(f"{lev} is not a sum of two squares")
            if lev == 0:
                modes.append(Mode(("const",), 0.0, std))
            for k in _half(pts):
                modes += _torus_pair(k, std)
    spec = SpectralFieldSpec(manifold, tuple(modes), RAW)
    return normalize(spec) if normalized else spec


def make_rsh(ell):
    """Random spherical harmonics of degree ell, C(x, y) = P_ell(<x, y>)."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    return make_band(geometry.SPHERE2, [ell])


def make_arw(m):
    """Arithmetic random wave on the unit torus with frequencies |k|^2 = m."""
    if m < 1 or not lattice_points(m):
        raise ValueError(f"{m} is not a sum of two squares")
    return make_band(geometry.TORUS2, [m])


def make_anisotropic(freqs, normalized=True):
    """Stationary torus field from ``[((k1, k2), std), ...]``."""
    modes = []
    seen = set()
    for k, std in freqs:
        k = tuple(int(v) for v in k)
        if k == (0, 0):
            raise ValueError("zero frequency carries no gradient")
        if not (k[0] > 0 or (k[0] == 0 and k[1] > 0)):
            k = (-k[0], -k[1])
        if k in seen:
            raise ValueError(f"duplicate frequency {k}")
        seen.add(k)
        modes += _torus_pair(k, float(std))
    if not modes:
        raise ValueError("empty frequency list")
    ks = np.array([m.label[1:] for m in modes], dtype=float)
    second = (ks * np.array([m.std**2 for m in modes])[:, None]).T @ ks
    if np.linalg.eigvalsh(second)[0] <= 1e-12 * np.trace(second):
        raise DegenerateFieldError("frequencies do not span the plane; gradient covariance singular")
    spec = SpectralFieldSpec(geometry.TORUS2, tuple(modes), RAW)
    return normalize(spec) if normalized else spec


def anisotropic_family(delta):
    """Frequencies (1,0) and (0,1) with stds 1 and 1 + delta."""
    return make_anisotropic([((1, 0), 1.0), ((0, 1), 1.0 + delta)])


# -- sampling -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldSample:
    spec: SpectralFieldSpec
    coefficients: np.ndarray = field(repr=False)
    seed: int = 0


def standard_normals(seed, count):
    """Counter-based stream: Philox keyed by ``seed``; entry i belongs to mode i."""
    gen = np.random.Generator(np.random.Philox(key=int(seed) % 2**128))
    return gen.standard_normal(count)


def sample_seed(base_seed, index):
    """Per-sample key derived from (base seed, sample index)."""
    ss = np.random.SeedSequence([int(base_seed) % 2**64, int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def sample_field(spec, seed):
    coeffs = standard_normals(seed, spec.size) * spec.stds
    return FieldSample(spec, coeffs, int(seed))


def sample_batch(spec, base_seed, count, start=0):
    """Coefficient matrix (count, N) and seeds for samples start..start+count-1."""
    seeds = [sample_seed(base_seed, i) for i in range(start, start + count)]
    coeffs = np.stack([standard_normals(s, spec.size) for s in seeds]) * spec.stds
    return coeffs, seeds


# -- basis evaluation -----------------------------------------------------------

def _legendre_normalized(lmax, theta):
    """Fully normalized associated Legendre functions and their theta-derivatives.

    Returns arrays P[l, m, ...] and dP[l, m, ...] for 0 <= m <= l <= lmax,
    normalized so that 2*pi * int P[l,m]^2 dcos(theta) = 1.
    """
    theta = np.asarray(theta, dtype=float)
    x, s = np.cos(theta), np.sin(theta)
    P = np.zeros((lmax + 1, lmax + 1) + theta.shape)
    dP = np.zeros_like(P)
    P[0, 0] = 1.0 / math.sqrt(4 * math.pi)
    for m in range(1, lmax + 1):
        P[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * s * P[m - 1, m - 1]
    for m in range(0, lmax):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(0, lmax + 1):
        for ell in range(m + 2, lmax + 1):
            a = math.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
            b = math.sqrt(((ell - 1) ** 2 - m * m) / (4 * (ell - 1) ** 2 - 1))
            P[ell, m] = a * (x * P[ell - 1, m] - b * P[ell - 2, m])
    for ell in range(lmax + 1):
        for m in range(ell + 1):
            lower = P[ell - 1, m] if ell > m else 0.0
            c = math.sqrt((2 * ell + 1) / (2 * ell - 1) * (ell * ell - m * m)) if ell > m else 0.0
            dP[ell, m] = (ell * x * P[ell, m] - c * lower) / s
    return P, dP


def basis_jet(spec, points, derivatives=True):
    """Eigenfunctions and frame gradients at ``points``.

    Returns an array of shape (P, 3, N) (rows: value, d1, d2) or, with
    ``derivatives=False``, values only with shape (P, N).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    npts, nmodes = len(pts), spec.size
    out = np.empty((npts, 3 if derivatives else 1, nmodes))
    if spec.manifold.kind == TORUS:
        for i, m in enumerate(spec.modes):
            if m.label[0] == "const":
                out[:, 0, i] = 1.0
                if derivatives:
                    out[:, 1:, i] = 0.0
                continue
            k = np.array(m.label[1:], dtype=float)
            arg = 2 * np.pi * pts @ k
            c, s = math.sqrt(2) * np.cos(arg), math.sqrt(2) * np.sin(arg)
            if m.label[0] == "cos":
                out[:, 0, i] = c
                if derivatives:
                    out[:, 1:, i] = -2 * np.pi * s[:, None] * k
            else:
                out[:, 0, i] = s
                if derivatives:
                    out[:, 1:, i] = 2 * np.pi * c[:, None] * k
    else:
        th, ph = pts[:, 0], pts[:, 1]
        if derivatives:
            geometry.sphere_frames(pts)  # pole check
        lmax = max(m.label[1] for m in spec.modes)
        P, dP = _legendre_normalized(lmax, th)
        st = np.sin(th)
        for i, md in enumerate(spec.modes):
            ell, m = md.label[1], md.label[2]
            am = abs(m)
            if m == 0:
                out[:, 0, i] = P[ell, 0]
                if derivatives:
                    out[:, 1, i] = dP[ell, 0]
                    out[:, 2, i] = 0.0
                continue
            trig, dtrig = ((np.cos(am * ph), -am * np.sin(am * ph)) if m > 0
                           else (np.sin(am * ph), am * np.cos(am * ph)))
            r2 = math.sqrt(2)
            out[:, 0, i] = r2 * P[ell, am] * trig
            if derivatives:
                out[:, 1, i] = r2 * dP[ell, am] * trig
                out[:, 2, i] = r2 * P[ell, am] * dtrig / st
    return out if derivatives else out[:, 0, :]


def _normalizer(spec, bj):
    """Pointwise jet transform T(x) with j_f = T j_phi for f = phi / sqrt(v); (P, 3, 3)."""
    s2 = spec.stds**2
    v = np.einsum("pi,i,pi->p", bj[:, 0], s2, bj[:, 0])
    dv = 2 * np.einsum("pi,i,pdi->pd", bj[:, 0], s2, bj[:, 1:])
    T = np.zeros((len(v), 3, 3))
    r = 1 / np.sqrt(v)
    T[:, 0, 0] = r
    T[:, 1:, 0] = -dv * (r**3 / 2)[:, None]
    T[:, 1, 1] = T[:, 2, 2] = r
    return T


def jet_matrix(spec, points):
    """Linear map from coefficients to jets, honoring pointwise normalization; (P, 3, N)."""
    bj = basis_jet(spec, points)
    if spec.pointwise_normalized:
        bj = np.einsum("pab,pbi->pai", _normalizer(spec, bj), bj)
    return bj


def value_matrix(spec, points):
    """Linear map from coefficients to field values, honoring pointwise normalization; (P, N).

    Needs no tangent frame, so sphere points may sit arbitrarily close to the poles.
    """
    B = basis_jet(spec, points, derivatives=False)
    if spec.pointwise_normalized:
        v = np.einsum("pi,i,pi->p", B, spec.stds**2, B)
        B = B / np.sqrt(v)[:, None]
    return B


@dataclass(frozen=True)
class Jet1:
    value: np.ndarray
    gradient: np.ndarray


def eval_jet(sample, x):
    """Value and frame gradient of the sample at chart point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    J = jet_matrix(sample.spec, x.reshape(-1, 2)) @ sample.coefficients
    shape = x.shape[:-1]
    return Jet1(J[:, 0].reshape(shape), J[:, 1:].reshape(shape + (2,)))


def batch_jets(spec, coeffs, points):
    """Jets for many samples: returns (S, P, 3) for coefficient matrix (S, N)."""
    return np.einsum("pai,si->spa", jet_matrix(spec, points), coeffs)


def laplacian_values(spec, coeffs, points):
    """Exact spectral Laplacian -sum c_i lambda_i^2 phi_i at points; (S, P)."""
    B = basis_jet(spec, points, derivatives=False)
    return (coeffs * -spec.eigenvalues) @ B.T


# -- covariances ----------------------------------------------------------------

@dataclass(frozen=True)
class JetCovariance:
    c: np.ndarray
    cpx: np.ndarray
    cpy: np.ndarray
    cpp: np.ndarray

    @classmethod
    def from_block(cls, J):
        return cls(J[..., 0, 0], J[..., 1:, 0], J[..., 0, 1:], J[..., 1:, 1:])

    def swapped(self):
        return JetCovariance(self.c, self.cpy, self.cpx, np.swapaxes(self.cpp, -1, -2))


def _mode_weights(spec, lx, ly):
    w = spec.stds**2
    mult = spec.l_multipliers()
    if lx:
        w = w * mult
    if ly:
        w = w * mult
    return w


def cov_block_modes(spec, x, y, lx=False, ly=False):
    """3x3 jet covariance blocks by explicit mode sums; x, y of shape (P, 2)."""
    Bx = jet_matrix(spec, x) if not (lx or ly) else basis_jet(spec, x)
    By = jet_matrix(spec, y) if not (lx or ly) else basis_jet(spec, y)
    if (lx or ly) and spec.pointwise_normalized:
        raise ValueError("L-operator covariances need a constant-variance spec")
    w = _mode_weights(spec, lx, ly)
    return np.einsum("pai,i,pbi->pab", Bx, w, By)


def _legendre_derivs(lmax, t):
    """P_l, P_l', P_l'' for l = 0..lmax at t (stable at t = +-1)."""
    t = np.asarray(t, dtype=float)
    P = np.zeros((lmax + 1,) + t.shape)
    D1 = np.zeros_like(P)
    D2 = np.zeros_like(P)
    P[0] = 1.0
    if lmax >= 1:
        P[1] = t
        D1[1] = 1.0
    for ell in range(1, lmax):
        P[ell + 1] = ((2 * ell + 1) * t * P[ell] - ell * P[ell - 1]) / (ell + 1)
        D1[ell + 1] = D1[ell - 1] + (2 * ell + 1) * P[ell]
        D2[ell + 1] = D2[ell - 1] + (2 * ell + 1) * D1[ell]
    return P, D1, D2


def cov_block_closed(spec, x, y, lx=False, ly=False):
    """3x3 jet covariance blocks from the covariance closed form (symmetric specs only)."""
    if spec.symmetry is None:
        raise ValueError("closed-form covariance needs a stationary or isotropic spec")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    groups = _groups(spec)
    lam2 = spec.lam2
    kind = spec.manifold.kind
    weights = {}
    for key, w in groups.items():
        mult = 1 - _group_eigenvalue(kind, key) / lam2
        weights[key] = w * (mult if lx else 1.0) * (mult if ly else 1.0)
    J = np.zeros(x.shape[:-1] + (3, 3))
    if kind == TORUS:
        d = x - y
        for k, w in weights.items():
            kv = 2 * np.pi * np.array(k, dtype=float)
            arg = d @ kv
            c, s = np.cos(arg), np.sin(arg)
            J[..., 0, 0] += w * c
            J[..., 1:, 0] += -w * s[..., None] * kv
            J[..., 0, 1:] += w * s[..., None] * kv
            J[..., 1:, 1:] += w * c[..., None, None] * np.outer(kv, kv)
    else:
        X, Y = geometry.embed(x), geometry.embed(y)
        Ex, Ey = geometry.sphere_frames(x), geometry.sphere_frames(y)
        t = np.clip(np.sum(X * Y, axis=-1), -1.0, 1.0)
        lmax = max(weights)
        P, D1, D2 = _legendre_derivs(lmax, t)
        wv = np.zeros(lmax + 1)
        for ell, w in weights.items():
            wv[ell] = w
        c0 = np.tensordot(wv, P, axes=1)
        c1 = np.tensordot(wv, D1, axes=1)
        c2 = np.tensordot(wv, D2, axes=1)
        ex_y = np.einsum("...ia,...a->...i", Ex, Y)   # <e_i(x), Y>
        x_ey = np.einsum("...a,...ja->...j", X, Ey)   # <X, e_j(y)>
        exey = np.einsum("...ia,...ja->...ij", Ex, Ey)
        J[..., 0, 0] = c0
        J[..., 1:, 0] = c1[..., None] * ex_y
        J[..., 0, 1:] = c1[..., None] * x_ey
        J[..., 1:, 1:] = c2[..., None, None] * ex_y[..., :, None] * x_ey[..., None, :] \
            + c1[..., None, None] * exey
    return J


def cov_block(spec, x, y, lx=False, ly=False):
    if spec.symmetry is not None:
        return cov_block_closed(spec, x, y, lx, ly)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    shape = x.shape[:-1]
    J = cov_block_modes(spec, x.reshape(-1, 2), y.reshape(-1, 2), lx, ly)
    return J.reshape(shape + (3, 3))


def cov_jet(spec, x, y):
    """First-jet covariance of the field at the point pair (x, y)."""
    J = cov_block(spec, x, y)
    if np.ndim(x) == 1 and np.ndim(y) == 1:
        J = J[0]
    return JetCovariance.from_block(J)


# -- metric and global parameters -----------------------------------------------

@dataclass(frozen=True)
class MetricData:
    gf: np.ndarray
    lambda_x: np.ndarray
    Lam: np.ndarray
    Lam_inv: np.ndarray
    gf_inv_sqrt: np.ndarray


def metric_from_gf(gf, n=2):
    gf = np.asarray(gf, dtype=float)
    w, V = np.linalg.eigh(gf)
    tr = np.trace(gf, axis1=-2, axis2=-1)
    if np.any(w <= 1e-14 * tr[..., None]):
        raise DegenerateFieldError(
            "Adler-Taylor metric not positive definite: the field violates the "
            "non-degenerate differential assumption")
    Vt = np.swapaxes(V, -1, -2)
    Lam = (V * np.sqrt(n * w)[..., None, :]) @ Vt
    Lam_inv = (V / np.sqrt(n * w)[..., None, :]) @ Vt
    gis = (V / np.sqrt(w)[..., None, :]) @ Vt
    return MetricData(gf, np.sqrt(tr), Lam, Lam_inv, gis)


def metric_data(spec, x):
    """Adler-Taylor matrix, frequency endomorphism and pointwise frequency at x."""
    x = np.asarray(x, dtype=float)
    J = cov_block(spec, x, x)
    if x.ndim == 1:
        J = J[0]
    return metric_from_gf(J[..., 1:, 1:], spec.n)


@dataclass(frozen=True)
class GlobalParams:
    sigma: float
    lam: float
    eps: float
    resolution: int
    eps_terms: tuple = (0.0, 0.0, 0.0)


def global_params(spec, resolution):
    """Average variance, average frequency and maximal eccentricity.

    sigma^2 and lambda^2 are quadrature means of E phi^2 and E|d phi|^2 / sigma^2 for
    the spectral sum phi.  The eccentricity adds, maximized over quadrature nodes:
    the largest |sqrt(n g^f(u,u)) / lambda - 1| over unit u (exact, from the
    eigenvalues of g^f), the variance defect |sqrt(E phi^2) / sigma - 1| and the
    normalized variance gradient |d sqrt(E phi^2)| sqrt(n) / (sigma lambda).
    """
    quad = geometry.build_manifold_quadrature(spec.manifold, resolution)
    raw = SpectralFieldSpec(spec.manifold, spec.modes, RAW)
    bj = basis_jet(raw, quad.nodes)
    s2 = raw.stds**2
    v = np.einsum("pi,i,pi->p", bj[:, 0], s2, bj[:, 0])
    grad2 = np.einsum("pdi,i,pdi->p", bj[:, 1:], s2, bj[:, 1:])
    vol = spec.manifold.volume
    sigma2 = quad.integrate(v) / vol
    lam2 = quad.integrate(grad2) / quad.integrate(v)
    sigma, lam, n = math.sqrt(sigma2), math.sqrt(lam2), spec.n

    md = metric_data(normalize(raw) if spec.symmetry is not None else
                     SpectralFieldSpec(spec.manifold, spec.modes, UNIT), quad.nodes)
    ev = np.linalg.eigvalsh(md.gf)
    term1 = float(np.max(np.abs(np.sqrt(n * ev) / lam - 1)))
    term2 = term3 = 0.0
    if spec.symmetry is None:
        dv = 2 * np.einsum("pi,i,pdi->pd", bj[:, 0], s2, bj[:, 1:])
        term2 = float(np.max(np.abs(np.sqrt(v) / sigma - 1)))
        grad_sqrt = np.linalg.norm(dv, axis=1) / (2 * np.sqrt(v))
        term3 = float(np.max(grad_sqrt) / sigma * math.sqrt(n) / lam)
    return GlobalParams(sigma, lam, term1 + term2 + term3, resolution, (term1, term2, term3))


def jet_norm(jc, mx, my):
    """g^f-adapted norm of a first-jet covariance: max of |C|, |C'|*, |C'|*, |C''|*."""
    a = np.abs(jc.c)
    b = np.linalg.norm(np.einsum("...ij,...j->...i", mx.gf_inv_sqrt, jc.cpx), axis=-1)
    c = np.linalg.norm(np.einsum("...ij,...j->...i", my.gf_inv_sqrt, jc.cpy), axis=-1)
    M = mx.gf_inv_sqrt @ jc.cpp @ my.gf_inv_sqrt
    d = np.linalg.norm(M, ord=2, axis=(-2, -1))
    return np.maximum(np.maximum(a, b), np.maximum(c, d))


def is_homothetic(spec, tol=1e-10):
    """Constant-variance spec whose Adler-Taylor metric is a multiple of the identity."""
    if spec.symmetry is None:
        return False
    probe = np.array([[1.1, 0.3]]) if spec.manifold.is_sphere else np.array([[0.1, 0.2]])
    g = metric_data(spec, probe).gf[0]
    return abs(g[0, 0] - g[1, 1]) + 2 * abs(g[0, 1]) <= tol * np.trace(g)
