"""Command-line front end: ``nodalchaos {constants,verify,simulate,variance,berry,nodal}``.

Every subcommand writes CSV and JSON under ``--out`` and exits with status 1
when one of its internal checks fails (2 for usage and configuration errors).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import chaos, checks, field, geometry, nodal, specfun, variance

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240611
CONFIG_KEYS = {"schema_version", "field", "bands", "q", "resolution", "fiber", "samples",
               "seed", "level", "workers", "chaos_resolution"}
FIELD_KEYS = {
    "rsh": {"ell"},
    "arw": {"m"},
    "band": {"manifold", "levels", "weights"},
    "anisotropic": {"delta", "freqs"},
    "explicit": {"spec"},
    "file": {"path"},
}
DEFAULT_BANDS = [[5], [1, 5], [4, 5], [1, 2, 5], [1, 2, 4, 5], [1, 2, 4, 5, 8, 9, 10]]
DIAGNOSTIC_SPHERE_BANDS = [[8, 9], [12, 13], [16, 17]]


class ConfigError(ValueError):
    pass


# -- configuration ----------------------------------------------------------------

def build_field(cfg):
    """Field spec from a config entry such as ``{"type": "arw", "m": 5}``."""
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ConfigError("field entry must be an object with a 'type' key")
    kind = cfg["type"]
    if kind not in FIELD_KEYS:
        raise ConfigError(f"unknown field type {kind!r}; expected one of {sorted(FIELD_KEYS)}")
    unknown = set(cfg) - FIELD_KEYS[kind] - {"type"}
    if unknown:
        raise ConfigError(f"unknown keys for field type {kind!r}: {sorted(unknown)}")
    if kind == "rsh":
        return field.make_rsh(int(cfg["ell"]))
    if kind == "arw":
        return field.make_arw(int(cfg["m"]))
    if kind == "band":
        return field.make_band(cfg.get("manifold", "torus"), [int(v) for v in cfg["levels"]],
                               cfg.get("weights"))
    if kind == "anisotropic":
        if "freqs" in cfg:
            return field.make_anisotropic([((int(k1), int(k2)), float(s)) for k1, k2, s in cfg["freqs"]])
        return field.anisotropic_family(float(cfg.get("delta", 0.2)))
    if kind == "explicit":
        return field.spec_from_dict(cfg["spec"])
    with open(cfg["path"]) as fh:
        return field.spec_from_json(fh.read())


def load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"config schema_version must be {SCHEMA_VERSION}, got {cfg.get('schema_version')!r}")
    return cfg


def _settings(args, defaults):
    """Merge defaults < config file < command-line flags."""
    cfg = load_config(args.config)
    out = dict(defaults)
    out.update({k: v for k, v in cfg.items() if k != "schema_version"})
    for key in ("seed", "resolution", "fiber", "samples", "level", "workers"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


# -- output helpers ---------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[h]) for h in header])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def write_json(path, obj):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text


def _plot(path, draw):
    """Render with a non-interactive backend; a plotting failure only warns."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(5, 4))
        draw(ax)
        fig.tight_layout()
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
    except Exception as exc:  # noqa: BLE001 - plots are optional output
        print(f"warning: plot {path} not written: {exc}", file=sys.stderr)


def _outdir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _finish(checklist, label):
    failed = [c for c in checklist if not c["passed"]]
    for c in failed:
        print(f"FAIL {label}: {c['name']} (value {c['value']!r}, tolerance {c['tolerance']!r})",
              file=sys.stderr)
    return 1 if failed else 0


def _chk(name, value, tol):
    value = float(value)
    return {"name": name, "passed": bool(value <= tol), "value": value, "tolerance": float(tol)}


# -- constants --------------------------------------------------------------------

def constants_rows(nmax=6, qmax=12):
    """Closed-form constants next to independent oracles."""
    if not (1 <= nmax <= 50 and 0 <= qmax <= 50):
        raise ConfigError("need 1 <= nmax <= 50 and 0 <= qmax <= 50")
    rows = []

    def add(name, n, q, a, b, closed, oracle):
        closed, oracle = float(closed), float(oracle)
        dev = abs(closed - oracle) / max(1.0, abs(oracle))
        rows.append({"name": name, "n": n, "q": q, "a": a, "b": b,
                     "closed": closed, "oracle": oracle, "deviation": dev})

    for h in range(qmax // 2 + 1):
        for a in range(h + 1):
            add("theta", "", 2 * h, a, h - a, specfun.theta(a, h - a), checks.theta_oracle(a, h - a))
    for b in range(qmax // 2 + 1):
        add("c_chi", "", 2 * b, "", b, specfun.c_chi(b), checks.c_chi_oracle(b))
    for n in range(1, nmax + 1):
        ratio0 = checks.chi_mean(n) / checks.sphere_area_oracle(n - 1) / checks.c_chi_oracle(0)
        for b in range(qmax // 2 + 1):
            add("A", n, 2 * b, "", b, specfun.a_coeff(n, b), ratio0 * checks.c_chi_oracle(b))
        for q in range(qmax + 1):
            add("beta", n, q, "", "", specfun.beta_const(n, q), checks.beta_oracle(n, q))
    rng = np.random.default_rng(np.random.SeedSequence([DEFAULT_SEED, 7]))
    for d in range(2, min(nmax, 4) + 1):
        for q in range(2, min(qmax, 12) + 1, 2):
            xi = rng.normal(size=d)
            add("c_dq", d, q, "", "", specfun.c_dq(d, q), checks.c_dq_oracle(d, q, xi))
    for n in range(0, nmax + 1):
        add("s_n", n, "", "", "", specfun.sphere_area(n), checks.sphere_area_oracle(n))
    return rows


def cmd_constants(args):
    out = _outdir(args)
    rows = constants_rows(args.nmax, args.qmax)
    header = ["name", "n", "q", "a", "b", "closed", "oracle", "deviation"]
    write_csv(os.path.join(out, "constants.csv"), header, rows)
    worst = max(r["deviation"] for r in rows)
    prefactor = specfun.sphere_area(1) / (2 * specfun.sphere_area(2) * math.sqrt(2))
    summary = {"rows": len(rows), "max_deviation": worst, "tolerance": 1e-8,
               "berry_prefactor_n2": prefactor}
    write_json(os.path.join(out, "constants.json"), summary)
    print(f"{len(rows)} rows, max deviation {worst:.3e}")
    return _finish([_chk("constants_match_oracles", worst, 1e-8)], "constants")


# -- verify -----------------------------------------------------------------------

def cmd_verify(args):
    out = _outdir(args)
    try:
        results = checks.run_suite(args.suite)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = {"suite": args.suite, "passed": all(c.passed for c in results),
              "checks": [c.to_dict() for c in results]}
    text = write_json(os.path.join(out, f"verify_{args.suite}.json"), report)
    sys.stdout.write(text)
    return _finish([{"name": f"{c.suite}.{c.name}", "passed": c.passed, "value": c.value,
                     "tolerance": c.tolerance} for c in results], "verify")


# -- sample-level work ----------------------------------------------------------------

def _map_blocks(func, jobs, workers):
    workers = max(1, min(int(workers), len(jobs)))
    if workers == 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(func, jobs))


def _simulate_block(job):
    spec, coeffs, qs, res, K, level = job
    quads = chaos.quadratures(spec.manifold, res, K)
    out = {}
    for q in qs:
        out[f"chaos_{q}"] = chaos.chaos_values(spec, coeffs, q, quads, level=level)
        if level == 0.0:
            out[f"tilde_{q}"] = chaos.tilde_values(spec, coeffs, q, quads)
    if level == 0.0 and field.is_homothetic(spec):
        out["closed2"] = chaos.closed2_values(spec, coeffs, quads.manifold)[1]
        out["closed4"] = chaos.closed4_values(spec, coeffs, quads.manifold)
    return out


def simulate_statistics(spec, samples, seed, qs, resolution, K, workers=1, level=0.0):
    """Per-sample chaos statistics keyed ``chaos_q``, ``tilde_q``, ``closed2``, ``closed4``."""
    coeffs, seeds = field.sample_batch(spec, seed, samples)
    jobs = [(spec, coeffs[lo:lo + nodal.BLOCK], tuple(qs), resolution, K, float(level))
            for lo in range(0, samples, nodal.BLOCK)]
    parts = _map_blocks(_simulate_block, jobs, workers)
    stats = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    return seeds, stats


def _form_of(key):
    if key.startswith("closed"):
        return key, int(key[-1])
    name, q = key.split("_")
    return ("general" if name == "chaos" else name), int(q)


def _default_field(s):
    if "field" not in s:
        raise ConfigError("config needs a 'field' entry")
    return build_field(s["field"])


def _chaos_res(s, spec):
    return int(s.get("chaos_resolution") or s.get("resolution") or (48 if spec.manifold.is_sphere else 64))


def cmd_simulate(args):
    s = _settings(args, {"seed": DEFAULT_SEED, "samples": 200, "fiber": 32, "q": [2, 4], "workers": 1})
    spec = _default_field(s)
    out = _outdir(args)
    print(f"seed {s['seed']}")
    res = _chaos_res(s, spec)
    seeds, stats = simulate_statistics(spec, int(s["samples"]), int(s["seed"]), s["q"], res,
                                       int(s["fiber"]), int(s["workers"]), float(s.get("level", 0.0)))
    names = sorted(stats, key=lambda k: (_form_of(k)[1], k))
    rows = []
    for i, sd in enumerate(seeds):
        for k in names:
            form, q = _form_of(k)
            rows.append({"index": i, "seed": sd, "q": q, "form": form, "value": stats[k][i],
                         "resolution": res, "K": s["fiber"], "t": float(s.get("level", 0.0))})
    write_csv(os.path.join(out, "simulate.csv"),
              ["index", "seed", "q", "form", "value", "resolution", "K", "t"], rows)
    summary = {"spec": spec.digest(), "samples": len(seeds), "seed": s["seed"], "resolution": res,
               "fiber": s["fiber"], "statistics": {}}
    checklist = []
    for k in names:
        m, mse = nodal.mean_se(stats[k])
        v, vse = nodal.var_se(stats[k])
        summary["statistics"][k] = {"mean": m, "mean_se": mse, "var": v, "var_se": vse}
        checklist.append(_chk(f"{k}_finite", 0.0 if np.all(np.isfinite(stats[k])) else 1.0, 0))
    if "closed2" in stats and "chaos_2" in stats:
        checklist.append(_chk("closed2_equals_chaos2",
                              np.abs(stats["closed2"] - stats["chaos_2"]).max(), 1e-8))
    summary["checks"] = checklist
    write_json(os.path.join(out, "simulate.json"), summary)
    return _finish(checklist, "simulate")


# -- variance ---------------------------------------------------------------------

def variance_rows(spec, qs, resolution, K, samples, seed, workers=1, chaos_resolution=None):
    mc_qs = [q for q in qs if q <= chaos.MAX_Q]
    stats = {}
    if samples and mc_qs:
        _, stats = simulate_statistics(spec, samples, seed, mc_qs,
                                       chaos_resolution or (48 if spec.manifold.is_sphere else 64), K, workers)
    rows, checklist, notes = [], [], []
    for q in qs:
        row = {"q": q, "var_exact": float("nan"), "var_bound": variance.var_bound(spec, q, resolution),
               "var_closed": float("nan"), "var_mc": float("nan"), "var_mc_se": float("nan"), "note": ""}
        if q <= 4:
            row["var_exact"] = variance.var_exact(spec, q, resolution, K)
            checklist.append(_chk(f"q{q}_exact_below_bound", row["var_exact"] - row["var_bound"], 1e-8))
            checklist.append(_chk(f"q{q}_exact_nonnegative", -row["var_exact"], 1e-10))
        else:
            row["note"] = "exact variance computed for q <= 4 only"
        if q in (2, 4):
            try:
                closed = variance.var2_closed if q == 2 else variance.var4_closed
                row["var_closed"] = closed(spec, resolution)
                # relative 1e-6 with an absolute floor for vanishing components
                excess = abs(row["var_closed"] - row["var_exact"]) - 1e-6 * abs(row["var_exact"])
                checklist.append(_chk(f"q{q}_closed_equals_exact", excess, 1e-10))
            except variance.ClosedFormError as exc:
                row["note"] = f"closed form skipped: {exc}"
                notes.append(f"q={q}: {exc}")
        key = f"chaos_{q}"
        if key in stats:
            row["var_mc"], row["var_mc_se"] = nodal.var_se(stats[key])
            if q <= 4:
                # absolute floor covers components that vanish identically
                excess = abs(row["var_mc"] - row["var_exact"]) - 4 * row["var_mc_se"]
                checklist.append(_chk(f"q{q}_mc_within_4se", excess, 1e-10))
        rows.append(row)
    return rows, checklist, notes


def cmd_variance(args):
    s = _settings(args, {"seed": DEFAULT_SEED, "samples": 500, "fiber": 32, "q": [2, 4],
                         "resolution": 32, "workers": 1})
    spec = _default_field(s)
    out = _outdir(args)
    print(f"seed {s['seed']}")
    rows, checklist, notes = variance_rows(spec, [int(q) for q in s["q"]], int(s["resolution"]),
                                           int(s["fiber"]), int(s["samples"]), int(s["seed"]),
                                           int(s["workers"]), s.get("chaos_resolution"))
    for n in notes:
        print(f"note: {n}", file=sys.stderr)
    header = ["q", "var_exact", "var_bound", "var_closed", "var_mc", "var_mc_se", "note"]
    write_csv(os.path.join(out, "variance.csv"), header, rows)
    write_json(os.path.join(out, "variance.json"),
               {"spec": spec.digest(), "seed": s["seed"], "resolution": s["resolution"],
                "fiber": s["fiber"], "samples": s["samples"], "rows": rows, "checks": checklist})

    def draw(ax):
        qs = [r["q"] for r in rows]
        ax.semilogy(qs, [r["var_bound"] for r in rows], "k--", label="2^q bound")
        ex = [(r["q"], r["var_exact"]) for r in rows if r["var_exact"] > 0]
        if ex:
            ax.semilogy(*zip(*ex), "o-", label="exact")
        mc = [(r["q"], r["var_mc"]) for r in rows if r["var_mc"] > 0]
        if mc:
            ax.semilogy(*zip(*mc), "s", mfc="none", label="Monte Carlo")
        ax.set_xlabel("q")
        ax.set_ylabel("variance")
        ax.legend()

    _plot(os.path.join(out, "variance.png"), draw)
    return _finish(checklist, "variance")


# -- berry ------------------------------------------------------------------------

def berry_rows(bands, resolution=32):
    rows = []
    for entry in bands:
        kind, levels = (entry.get("manifold", "torus"), entry["levels"]) if isinstance(entry, dict) \
            else ("torus", entry)
        spec = field.make_band(kind, [int(v) for v in levels], normalized=False)
        rep = variance.berry_report(spec, resolution)
        eps = field.global_params(spec, 16).eps
        row = {"manifold": kind, "levels": list(levels), "sigma2": rep.sigma2, "lam2": rep.lam2,
               "var_mu": rep.var_mu, "lhs": rep.lhs, "spectral_term": rep.spectral_term,
               "ratio": rep.ratio, "exact_term": rep.exact_term, "exact_ratio": rep.exact_ratio,
               "prefactor": rep.prefactor, "eps": eps, "scaled_lhs": float("nan")}
        if kind == geometry.SPHERE:
            row["scaled_lhs"] = rep.lhs * min(levels) ** (spec.n - 1)
        rows.append(row)
    return rows


def cmd_berry(args):
    s = _settings(args, {"bands": DEFAULT_BANDS, "resolution": 32})
    if not s["bands"]:
        print("error: band list is empty", file=sys.stderr)
        return 2
    out = _outdir(args)
    rows = berry_rows(s["bands"], int(s["resolution"]))
    diag = berry_rows([{"manifold": "sphere", "levels": b} for b in DIAGNOSTIC_SPHERE_BANDS],
                      int(s["resolution"]))
    header = ["manifold", "levels", "sigma2", "lam2", "var_mu", "lhs", "spectral_term", "ratio",
              "exact_term", "exact_ratio", "prefactor", "eps", "scaled_lhs"]
    write_csv(os.path.join(out, "berry.csv"), header, rows)
    write_csv(os.path.join(out, "berry_sphere_diagnostic.csv"), header, diag)
    checklist = []
    for r in rows:
        tag = f"{r['manifold']}_{'_'.join(str(v) for v in r['levels'])}"
        if len(r["levels"]) == 1:
            checklist.append(_chk(f"{tag}_singleton_zero", abs(r["lhs"]) + abs(r["spectral_term"]), 0))
        else:
            checklist.append(_chk(f"{tag}_exact_constant", abs(r["exact_ratio"] - 1), 1e-8))
    write_json(os.path.join(out, "berry.json"), {"rows": rows, "sphere_diagnostic": diag, "checks": checklist})

    def draw(ax):
        pts = [(r["spectral_term"], r["lhs"]) for r in rows if r["spectral_term"] > 0]
        if pts:
            x, y = zip(*pts)
            ax.loglog(x, y, "o", label="bands")
            lim = np.array([min(x), max(x)])
            ax.loglog(lim, lim, "k--", lw=0.8, label="lhs = spectral term")
        ax.set_xlabel("spectral term")
        ax.set_ylabel("Var(L[2]) / lambda^2")
        ax.legend()

    _plot(os.path.join(out, "berry.png"), draw)
    for r in rows:
        print(f"{r['manifold']} {r['levels']}: lhs {r['lhs']:.6g} spectral {r['spectral_term']:.6g} "
              f"ratio {r['ratio']:.4f}")
    return _finish(checklist, "berry")


# -- nodal ------------------------------------------------------------------------

def cmd_nodal(args):
    s = _settings(args, {"seed": DEFAULT_SEED, "samples": 100, "fiber": 32, "q": [2, 4],
                         "resolution": 256, "level": 0.0, "workers": 1})
    spec = _default_field(s)
    out = _outdir(args)
    print(f"seed {s['seed']}")
    grid = nodal.build_grid(spec.manifold, int(s["resolution"]))
    rep = nodal.mc_nodal(spec, int(s["samples"]), grid, float(s["level"]), int(s["seed"]),
                         [int(q) for q in s["q"]], s.get("chaos_resolution"), int(s["fiber"]),
                         int(s["workers"]))
    rows = [{"seed": sd, "length": L, "t": rep.level, "resolution": rep.resolution, "degenerate": d}
            for sd, L, d in zip(rep.seeds, rep.lengths, rep.degenerate)]
    write_csv(os.path.join(out, "nodal_samples.csv"), ["seed", "length", "t", "resolution", "degenerate"], rows)
    summary = rep.summary()
    cres = s.get("chaos_resolution") or (48 if spec.manifold.is_sphere else 64)
    quads = chaos.quadratures(spec.manifold, int(cres), int(s["fiber"]))
    expected = chaos.expected_length(spec, quads, rep.level)
    summary["expected_length"] = expected
    checklist = [_chk("lengths_nonnegative", -float(rep.lengths.min()), 0)]
    tol = max(4 * summary["mean_se"], 0.01 * expected)
    checklist.append(_chk("mean_matches_expected_length", abs(summary["mean"] - expected), tol))
    for name, vals in rep.stats.items():
        gap, se = nodal.projection_gap(rep.lengths, vals)
        summary["statistics"][name]["projection_gap"] = gap
        summary["statistics"][name]["projection_gap_se"] = se
    summary["checks"] = checklist
    write_json(os.path.join(out, "nodal_summary.json"), summary)

    def draw(ax):
        ax.hist(rep.lengths, bins=30, color="0.6")
        ax.axvline(expected, color="k", ls="--", label="expected length")
        ax.set_xlabel("nodal length")
        ax.legend()

    _plot(os.path.join(out, "nodal.png"), draw)
    print(f"mean length {summary['mean']:.6g} +- {summary['mean_se']:.2g} (expected {expected:.6g})")
    return _finish(checklist, "nodal")


# -- entry point ------------------------------------------------------------------

def _common(p, **defaults):
    p.add_argument("--config", metavar="PATH", help="JSON experiment config")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--out", metavar="DIR", default=defaults.get("out", "out"))
    p.add_argument("--workers", type=int, metavar="N")
    p.add_argument("--resolution", type=int, metavar="N")
    p.add_argument("--fiber", type=int, metavar="K")
    p.add_argument("--samples", type=int, metavar="N")
    p.add_argument("--level", type=float, metavar="T")


def make_parser():
    parser = argparse.ArgumentParser(prog="nodalchaos", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("constants", help="tables of chaos constants against oracles")
    p.add_argument("--nmax", type=int, default=6)
    p.add_argument("--qmax", type=int, default=12)
    _common(p)
    p.set_defaults(func=cmd_constants)
    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("suite", nargs="?", default="all", help="one of " + ", ".join(checks.SUITES + ("all",)))
    _common(p)
    p.set_defaults(func=cmd_verify)
    for name, func, text in (("simulate", cmd_simulate, "per-sample chaos statistics"),
                             ("variance", cmd_variance, "exact variances, bound and Monte Carlo"),
                             ("berry", cmd_berry, "second-component variance of band waves"),
                             ("nodal", cmd_nodal, "Monte Carlo nodal lengths")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, field.DegenerateFieldError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
