"""Invariant suites behind ``nodalchaos verify``.

Each check returns a :class:`Check` with the measured deviation and its
tolerance.  Module functions are looked up through their modules at call
time so a patched implementation is what gets checked.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from . import chaos, field, geometry, nodal, specfun, variance

SUITES = ("specfun", "geometry", "field", "chaos", "variance", "nodal")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    tolerance: float

    def to_dict(self):
        return asdict(self)


def _check(suite, name, value, tol):
    value = float(value)
    return Check(suite, name, bool(value <= tol), value, float(tol))


# -- independent oracles --------------------------------------------------------

def c_chi_oracle(b):
    """E[|g| H_2b(g)] / (2b)! from the exact half-line moments int_0^inf x^(2m+1) phi = 2^m m! / sqrt(2 pi)."""
    coef = specfun.hermite_coefficients(2 * b)
    num = sum(coef[2 * m] * 2**m * math.factorial(m) for m in range(b + 1))
    return float(Fraction(2 * num, math.factorial(2 * b))) / math.sqrt(2 * math.pi)


def theta_oracle(a, b):
    """pi * (coefficient of H_2a in the delta expansion) * c_chi(b)."""
    delta = specfun.hermite_at_zero(a) / (math.factorial(2 * a) * math.sqrt(2 * math.pi))
    return math.pi * delta * c_chi_oracle(b)


def sphere_area_oracle(n):
    """s_n by the recursion s_n = 2 pi s_{n-2} / (n - 1) from s_0 = 2, s_1 = 2 pi."""
    s = [2.0, 2 * math.pi]
    for k in range(2, n + 1):
        s.append(2 * math.pi * s[k - 2] / (k - 1))
    return s[n]


def beta_oracle(n, q):
    """beta(n, q) by the ratio beta(n, q+2) / beta(n, q) = (q+1)/(q+n)."""
    val = sphere_area_oracle(n - 1) if q % 2 == 0 else sphere_area_oracle(n) / math.pi
    for k in range(q % 2, q, 2):
        val *= (k + 1) / (k + n)
    return val


def chi_mean(n):
    """E|xi| for xi ~ N(0, I_n)."""
    return math.sqrt(2) * math.exp(math.lgamma((n + 1) / 2) - math.lgamma(n / 2))


def c_dq_oracle(d, q, xi, K=40):
    pts, w = geometry.sphere_quadrature(d, K)
    integral = w @ specfun.hermite_eval(q, pts @ xi)
    return specfun.laguerre_eval(q // 2, d / 2 - 1, xi @ xi / 2) / integral


def _rng(tag):
    return np.random.default_rng(np.random.SeedSequence([20240611, tag]))


# -- suites ---------------------------------------------------------------------

def suite_specfun():
    S = "specfun"
    out = []
    xs = np.linspace(-3, 3, 13)
    dev = max(float(np.max(np.abs(specfun.hermite_eval(q, xs)
                                  - np.polynomial.polynomial.polyval(xs, specfun.hermite_coefficients(q)))))
              for q in range(13))
    out.append(_check(S, "hermite_recurrence_matches_monomials", dev, 1e-8))
    dev = max(abs(specfun.hermite_eval(2 * a, Fraction(0)) - specfun.hermite_at_zero(a)) for a in range(10))
    out.append(_check(S, "hermite_at_zero_exact", dev, 0))
    dev = max(abs(float(specfun.theta(a, b)) - theta_oracle(a, b)) / abs(theta_oracle(a, b))
              for a in range(5) for b in range(5))
    out.append(_check(S, "theta_equals_delta_times_chi_coefficient", dev, 1e-8))
    out.append(_check(S, "theta_0_2_is_minus_1_over_24", abs(specfun.theta(0, 2) + Fraction(1, 24)), 0))
    dev = max(abs(specfun.c_chi(b) - c_chi_oracle(b)) for b in range(8))
    out.append(_check(S, "c_chi_half_moments", dev, 1e-8))
    dev = max(abs(specfun.sphere_area(n) - sphere_area_oracle(n)) / sphere_area_oracle(n) for n in range(12))
    out.append(_check(S, "sphere_area_recursion", dev, 1e-12))
    dev = max(abs(specfun.beta_const(n, q) - beta_oracle(n, q)) / beta_oracle(n, q)
              for n in range(1, 8) for q in range(9))
    out.append(_check(S, "beta_ratio_recursion", dev, 1e-10))
    dev = max(abs(specfun.a_coeff(n, 0) * specfun.sphere_area(n - 1) - chi_mean(n)) for n in range(1, 8))
    out.append(_check(S, "a_coefficient_reproduces_chi_mean", dev, 1e-10))
    rng = _rng(1)
    dev = 0.0
    for d in (2, 3, 4):
        for q in (2, 4, 6):
            xi = rng.normal(size=d)
            dev = max(dev, abs(specfun.c_dq(d, q) / c_dq_oracle(d, q, xi) - 1))
    out.append(_check(S, "laguerre_sphere_identity", dev, 1e-8))
    worst = 0
    for h in range(4):
        for a in range(h + 1):
            for a2 in range(h + 1):
                deg = (2 * a, 2 * (h - a), 2 * a2, 2 * (h - a2))
                for _ in range(2):
                    c = [Fraction(int(v), 7) for v in rng.integers(-7, 8, size=4)]
                    cov = [[1, 0, c[0], c[1]], [0, 1, c[2], c[3]],
                           [c[0], c[2], 1, 0], [c[1], c[3], 0, 1]]
                    got = specfun.diagram4(*deg, *c)
                    worst = max(worst, abs(got - specfun.wick_oracle(deg, cov)))
    out.append(_check(S, "diagram4_matches_wick_enumeration", worst, 0))
    bad = 0
    for q in range(0, 13, 2):
        lhs, rhs = specfun.coefficient_bound(q)
        bad += (lhs > rhs) or ((lhs == rhs) != (q == 0))
    out.append(_check(S, "coefficient_bound_strict_above_zero", bad, 0))
    bad = sum(specfun.vandermonde_sum(a, q // 2 - a, a2, q // 2 - a2) != math.factorial(q)
              for q in range(0, 11, 2) for a in range(q // 2 + 1) for a2 in range(q // 2 + 1))
    out.append(_check(S, "vandermonde_sum_is_factorial", bad, 0))
    return out


def suite_geometry():
    S = "geometry"
    out = []
    for kind in (geometry.SPHERE, geometry.TORUS):
        m = geometry.manifold(kind)
        q = geometry.build_manifold_quadrature(m, 16)
        out.append(_check(S, f"{kind}_quadrature_volume", abs(q.weights.sum() - m.volume), 1e-12))
    dev = 0.0
    for n in (2, 3, 4):
        pts, w = geometry.sphere_quadrature(n, 12)
        dev = max(dev, abs(w.sum() - specfun.sphere_area(n - 1)),
                  abs(w @ pts[:, 0] ** 4 - specfun.beta_const(n, 4)))
    out.append(_check(S, "sphere_quadrature_moments", dev, 1e-10))
    rng = _rng(2)
    dev = 0.0
    for _ in range(5):
        L = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        dev = max(dev, geometry.sphere_change_check(L, 256))
    out.append(_check(S, "circle_change_of_variables", dev, 1e-10))
    dev = 0.0
    for n in (2, 3, 4):
        A = rng.normal(size=(n, n))
        rep = geometry.spherical_moment_suite(n, A, rng.normal(size=n), K=24)
        dev = max(dev, max(v["deviation"] / max(1.0, abs(v["closed"])) for v in rep.values()))
    out.append(_check(S, "spherical_moment_closed_forms", dev, 1e-9))
    pts = np.array([[0.3, 1.0], [2.5, 4.0]])
    F = geometry.sphere_frames(pts)
    X = geometry.embed(pts)
    gram = np.einsum("pia,pja->pij", F, F) - np.eye(2)
    dev = max(float(np.abs(gram).max()), float(np.abs(np.einsum("pia,pa->pi", F, X)).max()))
    out.append(_check(S, "sphere_frames_orthonormal_tangent", dev, 1e-14))
    return out


def suite_field():
    S = "field"
    out = []
    for spec in (field.make_band("torus", [1, 2, 5], normalized=False),
                 field.make_band("sphere", [0, 1, 3], normalized=False)):
        q = geometry.build_manifold_quadrature(spec.manifold, 16)
        B = field.basis_jet(spec, q.nodes, derivatives=False)
        gram = (B * q.weights[:, None]).T @ B
        out.append(_check(S, f"{spec.manifold.kind}_basis_orthonormal",
                          np.abs(gram - np.eye(spec.size)).max(), 1e-12))
    rng = _rng(3)
    pts_t = rng.uniform(0, 1, size=(6, 2))
    pts_s = np.column_stack([rng.uniform(0.3, 2.8, 6), rng.uniform(0, 2 * np.pi, 6)])
    for spec, pts in ((field.make_band("torus", [1, 5]), pts_t), (field.make_band("sphere", [2, 4]), pts_s)):
        for lx, ly in ((False, False), (True, False), (True, True)):
            a = field.cov_block_closed(spec, pts, pts[::-1], lx, ly)
            b = field.cov_block_modes(spec, pts, pts[::-1], lx, ly)
            out.append(_check(S, f"{spec.manifold.kind}_closed_cov_matches_modes_L{int(lx)}{int(ly)}",
                              np.abs(a - b).max(), 1e-10))
        out.append(_check(S, f"{spec.manifold.kind}_unit_variance",
                          np.abs(field.cov_block(spec, pts, pts)[:, 0, 0] - 1).max(), 1e-12))
    m = 5
    g = field.metric_data(field.make_arw(m), pts_t).gf
    out.append(_check(S, "arw_metric_isotropic", np.abs(g - 2 * math.pi**2 * m * np.eye(2)).max(), 1e-9))
    spec = field.anisotropic_family(0.3)
    s = field.sample_field(spec, 11)
    x, h = np.array([0.31, 0.17]), 1e-6
    jet = field.eval_jet(s, x)
    fd = [(field.eval_jet(s, x + h * e).value - field.eval_jet(s, x - h * e).value) / (2 * h)
          for e in np.eye(2)]
    out.append(_check(S, "gradient_matches_finite_differences",
                      np.abs(np.array(fd) - jet.gradient).max() / np.abs(jet.gradient).max(), 1e-7))
    out.append(_check(S, "homothetic_eccentricity_zero", field.global_params(field.make_arw(5), 16).eps, 1e-12))
    ecc = field.global_params(field.anisotropic_family(0.2), 16).eps
    out.append(_check(S, "anisotropic_eccentricity_positive", 0.0 if ecc > 0.05 else 1.0, 0))
    a, b = field.sample_field(spec, 99).coefficients, field.sample_field(spec, 99).coefficients
    out.append(_check(S, "sampling_deterministic", np.abs(a - b).max(), 0))
    return out


def suite_chaos():
    S = "chaos"
    out = []
    arw = field.make_arw(5)
    quads = chaos.quadratures(arw.manifold, 32, 32)
    coeffs, _ = field.sample_batch(arw, 5, 4)
    vals = {f: chaos.chaos_values(arw, coeffs, 4, quads, f) for f in chaos.FORMS}
    dev = max(np.abs(vals[f] - vals["general"]).max() for f in chaos.FORMS)
    out.append(_check(S, "three_forms_agree", dev, 1e-9))
    out.append(_check(S, "surrogate_equals_chaos_when_homothetic",
                      np.abs(chaos.tilde_values(arw, coeffs, 4, quads) - vals["general"]).max(), 1e-9))
    out.append(_check(S, "second_component_vanishes_single_eigenvalue",
                      np.abs(chaos.chaos_values(arw, coeffs, 2, quads)).max(), 1e-10))
    out.append(_check(S, "closed4_equals_chaos4",
                      np.abs(chaos.closed4_values(arw, coeffs, quads.manifold) - vals["general"]).max(), 1e-9))
    band = field.make_band("torus", [1, 5])
    bq = chaos.quadratures(band.manifold, 32, 32)
    bc, _ = field.sample_batch(band, 6, 4)
    by_quad, spectral = chaos.closed2_values(band, bc, bq.manifold)
    out.append(_check(S, "closed2_quadrature_equals_spectral", np.abs(by_quad - spectral).max(), 1e-10))
    out.append(_check(S, "closed2_equals_chaos2",
                      np.abs(chaos.chaos_values(band, bc, 2, bq) - spectral).max(), 1e-9))
    mean = chaos.expected_length(field.make_arw(1), chaos.quadratures(geometry.TORUS2, 16))
    out.append(_check(S, "expected_length_kac_rice", abs(mean - math.pi / math.sqrt(2)), 1e-10))
    out.append(_check(S, "chi_partial_q0_is_chi_mean",
                      abs(chaos.chi_partial(np.zeros(3), np.eye(3), 0, K=16) - chi_mean(3)), 1e-6))
    return out


def suite_variance():
    S = "variance"
    out = []
    band, arw1 = field.make_band("torus", [1, 5]), field.make_arw(1)
    v2 = variance.var_exact(band, 2, 16)
    out.append(_check(S, "var2_exact_equals_closed", abs(v2 - variance.var2_closed(band, 16)), 1e-8))
    v4 = variance.var_exact(arw1, 4, 16)
    out.append(_check(S, "var4_exact_equals_closed", abs(v4 / variance.var4_closed(arw1, 16) - 1), 1e-6))
    out.append(_check(S, "var2_zero_single_eigenvalue", abs(variance.var_exact(arw1, 2, 16)), 1e-10))
    worst = -np.inf
    for spec in (field.make_rsh(5), field.make_arw(5), band, field.anisotropic_family(0.2)):
        for q in (2, 4):
            worst = max(worst, variance.var_exact(spec, q, 16) - variance.var_bound(spec, q, 16))
    out.append(_check(S, "exact_below_bound", max(worst, 0.0), 1e-8))
    out.append(_check(S, "stationary_reduction_equals_full",
                      abs(variance.var_exact(band, 2, 8) - variance.var_exact(band, 2, 8, full=True)), 1e-10))
    sph = field.make_band("sphere", [1, 2])
    out.append(_check(S, "isotropic_reduction_equals_full",
                      abs(variance.var_exact(sph, 2, 8, K=8) - variance.var_exact(sph, 2, 8, K=8, full=True)),
                      1e-10))
    x, y, w = variance.pair_rule(band, 16)
    lhs = w @ (variance.l_operator_cov(band, x, y, "first") * field.cov_block(band, x, y)[:, 0, 0])
    rhs = w @ (field.cov_block(band, x, y)[:, 0, 0] * variance.l_operator_cov(band, x, y, "second"))
    out.append(_check(S, "l_operator_self_adjoint", abs(lhs - rhs), 1e-10))
    rep = variance.berry_report(field.make_band("torus", [1, 5], normalized=False))
    out.append(_check(S, "berry_exact_constant", abs(rep.exact_ratio - 1), 1e-8))
    rep = variance.berry_report(field.make_band("torus", [5], normalized=False))
    out.append(_check(S, "berry_singleton_zero", abs(rep.lhs) + abs(rep.spectral_term), 0))
    return out


def suite_nodal():
    S = "nodal"
    out = []
    line = field.SpectralFieldSpec(geometry.TORUS2, (field.Mode(("cos", 1, 0), 4 * math.pi**2, 1.0),))
    s = field.FieldSample(line, np.array([1 / math.sqrt(2)]))
    out.append(_check(S, "torus_vertical_circles",
                      abs(nodal.nodal_length(s, nodal.build_grid(geometry.TORUS2, 32)).length - 2), 1e-12))
    out.append(_check(S, "level_above_max_empty",
                      nodal.nodal_length(s, nodal.build_grid(geometry.TORUS2, 32), t=2.0).length, 0))
    z = field.SpectralFieldSpec(geometry.SPHERE2, (field.Mode(("Y", 1, 0), 2.0, 1.0),))
    eq = nodal.nodal_length(field.FieldSample(z, np.array([1.0])), nodal.build_grid(geometry.SPHERE2, 128))
    out.append(_check(S, "sphere_equator", abs(eq.length / (2 * math.pi) - 1), 1e-3))
    arw = field.make_arw(1)
    rep = nodal.mc_nodal(arw, 64, nodal.build_grid(geometry.TORUS2, 128), seed=3, qs=())
    mean, se = nodal.mean_se(rep.lengths)
    out.append(_check(S, "mc_mean_kac_rice_sigmas", abs(mean - math.pi / math.sqrt(2)) / se, 4))
    again = nodal.mc_nodal(arw, 64, nodal.build_grid(geometry.TORUS2, 128), seed=3, qs=())
    out.append(_check(S, "mc_deterministic", np.abs(rep.lengths - again.lengths).max(), 0))
    return out


_SUITE_FUNCS = {name: globals()[f"suite_{name}"] for name in SUITES}


def run_suite(name):
    """Run one suite (or ``all``) and return the list of checks."""
    if name == "all":
        return [c for s in SUITES for c in _SUITE_FUNCS[s]()]
    if name not in _SUITE_FUNCS:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES + ('all',)}")
    return _SUITE_FUNCS[name]()
