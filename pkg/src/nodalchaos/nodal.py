"""Monte Carlo nodal-length oracle.

Level sets are extracted from vertex samples by piecewise-linear
interpolation: marching squares on the periodic torus grid, per-triangle
crossings on a latitude-longitude triangulation of the sphere.  Torus
segments are measured in the flat chart, sphere segments as chords in R^3
(O(h^2) below the geodesic length).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import chaos, geometry
from . import field as fld

# samples per work unit; fixed so results never depend on the worker count
BLOCK = 16
DEGENERATE_SHIFT = 1e-12


@dataclass(frozen=True, eq=False)
class NodalGrid:
    """Vertices (chart points) and cell structure for one manifold.

    Torus: ``resolution**2`` vertices at (i, j) / resolution with periodic
    wrap, plus cell centers for saddle disambiguation.  Sphere:
    ``resolution + 1`` colatitude rows in [POLE_EPS, pi - POLE_EPS] times
    ``2 * resolution`` longitudes, each quadrilateral split into two triangles.
    """
    kind: str
    resolution: int
    vertices: np.ndarray = field(repr=False)
    centers: np.ndarray = field(default=None, repr=False)
    xyz: np.ndarray = field(default=None, repr=False)
    triangles: np.ndarray = field(default=None, repr=False)

    @property
    def size(self):
        return len(self.vertices)


def build_grid(model, resolution):
    if isinstance(model, str):
        model = geometry.manifold(model)
    if resolution < 4:
        raise ValueError(f"resolution must be >= 4, got {resolution}")
    r = resolution
    if model.kind == geometry.TORUS:
        g = np.arange(r) / r
        x1, x2 = np.meshgrid(g, g, indexing="ij")
        verts = np.column_stack([x1.ravel(), x2.ravel()])
        return NodalGrid(model.kind, r, verts, centers=verts + 0.5 / r)
    th = np.linspace(geometry.POLE_EPS, np.pi - geometry.POLE_EPS, r + 1)
    ph = 2 * np.pi * np.arange(2 * r) / (2 * r)
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    verts = np.column_stack([tt.ravel(), pp.ravel()])
    idx = np.arange((r + 1) * 2 * r).reshape(r + 1, 2 * r)
    a, b = idx[:-1], idx[1:]
    c, d = np.roll(b, -1, axis=1), np.roll(a, -1, axis=1)
    tris = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3),
                           np.stack([a, c, d], -1).reshape(-1, 3)])
    return NodalGrid(model.kind, r, verts, xyz=geometry.embed(verts), triangles=tris)


@dataclass(frozen=True)
class NodalResult:
    length: float
    level: float
    resolution: int
    seed: int
    degenerate: int = 0


def _shift_degenerate(g):
    """Move exact vertex zeros off the level; returns the shifted values and the count."""
    hits = g == 0
    count = int(hits.sum())
    if count:
        scale = max(float(np.max(np.abs(g))), 1.0)
        g = np.where(hits, DEGENERATE_SHIFT * scale, g)
    return g, count


def _torus_length(g, gc, r):
    """Marching-squares length of {g = 0} on an r x r periodic grid (chart units)."""
    g00 = g
    g10 = np.roll(g, -1, axis=0)
    g11 = np.roll(g10, -1, axis=1)
    g01 = np.roll(g, -1, axis=1)
    s00, s10, s11, s01 = g00 > 0, g10 > 0, g11 > 0, g01 > 0

    def cut(ga, gb):
        with np.errstate(divide="ignore", invalid="ignore"):
            return ga / (ga - gb)

    # crossing points in local cell coordinates
    t0, t1, t2, t3 = cut(g00, g10), cut(g10, g11), cut(g01, g11), cut(g00, g01)
    p = [(t0, 0.0), (1.0, t1), (t2, 1.0), (0.0, t3)]
    cross = [s00 != s10, s10 != s11, s01 != s11, s00 != s01]
    count = sum(c.astype(int) for c in cross)

    def seg(i, j):
        return np.hypot(p[i][0] - p[j][0], p[i][1] - p[j][1])

    total = 0.0
    simple = count == 2
    for i in range(4):
        for j in range(i + 1, 4):
            m = simple & cross[i] & cross[j]
            if m.any():
                total += seg(i, j)[m].sum()
    saddle = count == 4
    if saddle.any():
        # the center sign says which diagonal pair of corners is connected
        joined = (gc > 0) == s00
        m1, m2 = saddle & joined, saddle & ~joined
        total += (seg(0, 1) + seg(2, 3))[m1].sum() + (seg(0, 3) + seg(1, 2))[m2].sum()
    return total / r


def _sphere_length(g, xyz, tris):
    ga, gb, gc = g[tris[:, 0]], g[tris[:, 1]], g[tris[:, 2]]
    sa, sb, sc = ga > 0, gb > 0, gc > 0
    hit = (sa != sb) | (sb != sc)
    if not hit.any():
        return 0.0
    tri = tris[hit]
    gv = np.stack([ga[hit], gb[hit], gc[hit]], axis=1)
    sv = gv > 0
    P = xyz[tri]                                   # (T, 3, 3)
    pts = []
    for i, j in ((0, 1), (1, 2), (2, 0)):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = gv[:, i] / (gv[:, i] - gv[:, j])
            pt = P[:, i] + t[:, None] * (P[:, j] - P[:, i])
        pts.append((sv[:, i] != sv[:, j], pt))
    # exactly two edges cross in every hit triangle
    (c0, q0), (c1, q1), (c2, q2) = pts
    first = np.where(c0[:, None], q0, q1)
    second = np.where(c2[:, None], q2, q1)
    return float(np.linalg.norm(first - second, axis=1).sum())


def _lengths_from_values(grid, values, centers, level):
    out = np.empty(len(values))
    degen = np.zeros(len(values), dtype=int)
    r = grid.resolution
    for s in range(len(values)):
        g, degen[s] = _shift_degenerate(values[s] - level)
        if grid.kind == geometry.TORUS:
            out[s] = _torus_length(g.reshape(r, r), (centers[s] - level).reshape(r, r), r)
        else:
            out[s] = _sphere_length(g, grid.xyz, grid.triangles)
    return out, degen


def nodal_length(sample, grid, t=0.0):
    """Length of {f = t} for one sample on ``grid``."""
    spec = sample.spec
    c = np.atleast_2d(sample.coefficients)
    values = c @ fld.value_matrix(spec, grid.vertices).T
    centers = c @ fld.value_matrix(spec, grid.centers).T if grid.centers is not None else None
    length, degen = _lengths_from_values(grid, values, centers, t)
    return NodalResult(float(length[0]), float(t), grid.resolution, sample.seed, int(degen[0]))


# per-process cache of evaluation matrices keyed by (spec digest, grid kind, resolution)
_MATRICES = {}


def _matrices(spec, grid):
    key = (spec.digest(), grid.kind, grid.resolution)
    if key not in _MATRICES:
        _MATRICES.clear()
        V = fld.value_matrix(spec, grid.vertices)
        C = fld.value_matrix(spec, grid.centers) if grid.centers is not None else None
        _MATRICES[key] = (V, C)
    return _MATRICES[key]


def _block_work(args):
    spec, grid, level, coeffs, qs, chaos_res, K = args
    V, C = _matrices(spec, grid)
    values = coeffs @ V.T
    centers = coeffs @ C.T if C is not None else None
    lengths, degen = _lengths_from_values(grid, values, centers, level)
    stats = {}
    if qs:
        quads = chaos.quadratures(spec.manifold, chaos_res, K)
        for q in qs:
            stats[f"chaos_{q}"] = chaos.chaos_values(spec, coeffs, q, quads, level=level)
        if level == 0.0 and fld.is_homothetic(spec):
            mq = geometry.build_manifold_quadrature(spec.manifold, chaos_res)
            stats["closed2"] = chaos.closed2_values(spec, coeffs, mq)[1]
            stats["closed4"] = chaos.closed4_values(spec, coeffs, mq)
    return lengths, degen, stats


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def var_se(x):
    """Unbiased sample variance and its standard error (fourth-moment estimate)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    d = x - x.mean()
    s2 = float(d @ d / (n - 1))
    m4 = float(np.mean(d**4))
    return s2, math.sqrt(max(m4 - (n - 3) / (n - 1) * s2**2, 0.0) / n)


def cov_se(x, y):
    """Sample covariance and the standard error of the mean of centered products."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    n = len(x)
    prod = (x - x.mean()) * (y - y.mean())
    return float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / math.sqrt(n))


def projection_gap(length, stat):
    """Cov(L, S) - Var(S) with its standard error; zero when S is a chaos projection of L."""
    length, stat = np.asarray(length, dtype=float), np.asarray(stat, dtype=float)
    n = len(stat)
    ds = stat - stat.mean()
    prod = (length - length.mean()) * ds - ds**2
    return float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / math.sqrt(n))


@dataclass
class MCReport:
    spec_digest: str
    nsamples: int
    level: float
    resolution: int
    seeds: list = field(repr=False)
    lengths: np.ndarray = field(repr=False)
    degenerate: np.ndarray = field(repr=False)
    stats: dict = field(repr=False)

    def summary(self):
        mean, mse = mean_se(self.lengths)
        var, vse = var_se(self.lengths)
        out = {"spec": self.spec_digest, "samples": self.nsamples, "level": self.level,
               "resolution": self.resolution, "mean": mean, "mean_se": mse,
               "var": var, "var_se": vse, "degenerate": int(self.degenerate.sum()),
               "statistics": {}}
        for name, vals in self.stats.items():
            m, ms = mean_se(vals)
            v, vs = var_se(vals)
            c, cs = cov_se(self.lengths, vals)
            out["statistics"][name] = {"mean": m, "mean_se": ms, "var": v, "var_se": vs,
                                       "cov_length": c, "cov_length_se": cs}
        return out


def mc_nodal(spec, nsamples, grid, t=0.0, seed=0, qs=(2, 4), chaos_resolution=None, K=32,
             workers=1, start=0):
    """Nodal lengths and chaos statistics on the same ``nsamples`` realizations.

    Samples are processed in blocks of :data:`BLOCK`; results are identical
    for every ``workers`` value.
    """
    if nsamples < 2:
        raise ValueError("need at least 2 samples")
    if chaos_resolution is None:
        chaos_resolution = 48 if spec.manifold.is_sphere else 64
    coeffs, seeds = fld.sample_batch(spec, seed, nsamples, start)
    jobs = [(spec, grid, float(t), coeffs[lo:lo + BLOCK], tuple(qs), chaos_resolution, K)
            for lo in range(0, nsamples, BLOCK)]
    workers = max(1, min(int(workers), len(jobs)))
    if workers == 1:
        results = [_block_work(j) for j in jobs]
    else:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_block_work, jobs))
    lengths = np.concatenate([r[0] for r in results])
    degen = np.concatenate([r[1] for r in results])
    stats = {k: np.concatenate([r[2][k] for r in results]) for k in results[0][2]}
    return MCReport(spec.digest(), nsamples, float(t), grid.resolution, seeds, lengths, degen, stats)
