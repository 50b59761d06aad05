import csv
import json
import math
from fractions import Fraction

import pytest

from nodalchaos import checks, cli, specfun


def _run(*argv):
    return cli.main([str(a) for a in argv])


def _config(tmp_path, **entries):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"schema_version": 1, **entries}))
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_constants_table(tmp_path):
    assert _run("constants", "--out", tmp_path) == 0
    rows = _rows(tmp_path / "constants.csv")
    beta21 = [r for r in rows if r["name"] == "beta" and r["n"] == "2" and r["q"] == "1"]
    assert float(beta21[0]["closed"]) == pytest.approx(4.0, rel=1e-14)
    th02 = [r for r in rows if r["name"] == "theta" and r["a"] == "0" and r["b"] == "2"]
    assert float(th02[0]["closed"]) == pytest.approx(float(Fraction(-1, 24)), rel=1e-14)
    assert max(float(r["deviation"]) for r in rows) <= 1e-8
    summary = json.loads((tmp_path / "constants.json").read_text())
    assert summary["berry_prefactor_n2"] == pytest.approx(1 / (4 * math.sqrt(2)), rel=1e-14)


def test_constants_range_checked(tmp_path):
    assert _run("constants", "--nmax", 51, "--out", tmp_path) == 2


def test_verify_specfun_passes(tmp_path, capsys):
    assert _run("verify", "specfun", "--out", tmp_path) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["suite"] == "specfun"
    assert (tmp_path / "verify_specfun.json").exists()


def test_verify_unknown_suite(tmp_path):
    assert _run("verify", "nonsense", "--out", tmp_path) == 2


def test_verify_detects_tampered_theta_sign(tmp_path, monkeypatch, capsys):
    original = specfun.theta
    monkeypatch.setattr(specfun, "theta", lambda a, b: -original(a, b) if (a + b) % 2 else original(a, b))
    assert _run("verify", "all", "--out", tmp_path) == 1
    report = json.loads(capsys.readouterr().out)
    failed = {c["name"] for c in report["checks"] if not c["passed"]}
    assert "theta_equals_delta_times_chi_coefficient" in failed


def test_verify_report_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run("verify", "all", "--out", a) == 0
    assert _run("verify", "all", "--out", b) == 0
    assert (a / "verify_all.json").read_bytes() == (b / "verify_all.json").read_bytes()


def test_simulate_bytes_identical_across_runs_and_workers(tmp_path):
    cfg = _config(tmp_path, field={"type": "band", "levels": [1, 5]}, q=[2, 4], resolution=32, fiber=16)
    outs = []
    for name, workers in (("w1", 1), ("w1b", 1), ("w3", 3)):
        assert _run("simulate", "--config", cfg, "--samples", 40, "--workers", workers,
                    "--out", tmp_path / name) == 0
        outs.append((tmp_path / name / "simulate.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]
    rows = _rows(tmp_path / "w1" / "simulate.csv")
    assert {r["form"] for r in rows} == {"general", "tilde", "closed2", "closed4"}
    assert len({r["seed"] for r in rows}) == 40
    assert set(rows[0]) == {"index", "seed", "q", "form", "value", "resolution", "K", "t"}


def test_seed_flag_changes_output(tmp_path):
    cfg = _config(tmp_path, field={"type": "arw", "m": 5}, resolution=32, fiber=8)
    _run("simulate", "--config", cfg, "--samples", 5, "--out", tmp_path / "a")
    _run("simulate", "--config", cfg, "--samples", 5, "--seed", 1, "--out", tmp_path / "b")
    assert (tmp_path / "a" / "simulate.csv").read_bytes() != (tmp_path / "b" / "simulate.csv").read_bytes()


@pytest.mark.parametrize("cfg", [
    {"schema_version": 1, "field": {"type": "arw", "m": 5}, "colour": "red"},
    {"schema_version": 2, "field": {"type": "arw", "m": 5}},
    {"schema_version": 1, "field": {"type": "arw", "m": 5, "ell": 3}},
    {"schema_version": 1, "field": {"type": "plane"}},
    {"schema_version": 1},
])
def test_bad_config_exits_2(tmp_path, cfg):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert _run("simulate", "--config", path, "--samples", 4, "--out", tmp_path) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert _run("simulate", "--config", tmp_path / "absent.json", "--out", tmp_path) == 2


def test_variance_rsh_second_row_is_zero(tmp_path):
    cfg = _config(tmp_path, field={"type": "rsh", "ell": 5}, chaos_resolution=24)
    assert _run("variance", "--config", cfg, "--samples", 32, "--fiber", 16, "--out", tmp_path) == 0
    rows = {int(r["q"]): r for r in _rows(tmp_path / "variance.csv")}
    assert abs(float(rows[2]["var_exact"])) <= 1e-10
    assert float(rows[4]["var_bound"]) >= float(rows[4]["var_exact"])


def test_variance_band_mc_and_closed_forms(tmp_path):
    cfg = _config(tmp_path, field={"type": "band", "levels": [1, 5]}, chaos_resolution=32)
    assert _run("variance", "--config", cfg, "--samples", 400, "--fiber", 16, "--out", tmp_path) == 0
    rows = {int(r["q"]): r for r in _rows(tmp_path / "variance.csv")}
    r2 = rows[2]
    assert abs(float(r2["var_mc"]) - float(r2["var_exact"])) <= 4 * float(r2["var_mc_se"])
    assert float(r2["var_closed"]) == pytest.approx(float(r2["var_exact"]), rel=1e-6)


def test_variance_names_violated_assumption(tmp_path, capsys):
    cfg = _config(tmp_path, field={"type": "anisotropic", "delta": 0.2}, chaos_resolution=32)
    assert _run("variance", "--config", cfg, "--samples", 16, "--fiber", 16, "--out", tmp_path) == 0
    assert "homothetic" in capsys.readouterr().err
    rows = _rows(tmp_path / "variance.csv")
    assert all("homothetic" in r["note"] for r in rows)


def test_berry_table(tmp_path, capsys):
    cfg = _config(tmp_path, bands=[[5], [1, 5], {"manifold": "sphere", "levels": [3]}])
    assert _run("berry", "--config", cfg, "--out", tmp_path) == 0
    rows = _rows(tmp_path / "berry.csv")
    for r in rows:
        assert float(r["prefactor"]) == pytest.approx(1 / (4 * math.sqrt(2)), rel=1e-14)
        if " " not in r["levels"]:
            assert float(r["lhs"]) == 0 and float(r["spectral_term"]) == 0
    wide = [r for r in rows if r["levels"] == "1 5"][0]
    assert float(wide["exact_ratio"]) == pytest.approx(1, rel=1e-8)
    assert (tmp_path / "berry_sphere_diagnostic.csv").exists()


def test_berry_empty_band_list(tmp_path):
    assert _run("berry", "--config", _config(tmp_path, bands=[]), "--out", tmp_path) == 2


def test_nodal_command(tmp_path):
    cfg = _config(tmp_path, field={"type": "arw", "m": 1}, chaos_resolution=32)
    assert _run("nodal", "--config", cfg, "--samples", 64, "--resolution", 64, "--fiber", 16,
                "--out", tmp_path) == 0
    rows = _rows(tmp_path / "nodal_samples.csv")
    assert len(rows) == 64 and all(float(r["length"]) >= 0 for r in rows)
    summary = json.loads((tmp_path / "nodal_summary.json").read_text())
    assert summary["expected_length"] == pytest.approx(math.pi / math.sqrt(2), rel=1e-12)
    assert "projection_gap" in summary["statistics"]["closed4"]


def test_failed_internal_check_gives_exit_1(tmp_path, monkeypatch):
    monkeypatch.setattr(cli.variance, "var_bound", lambda spec, q, resolution, full=False: -1.0)
    cfg = _config(tmp_path, field={"type": "arw", "m": 5})
    assert _run("variance", "--config", cfg, "--samples", 0, "--out", tmp_path) == 1


def test_plot_failure_does_not_fail_run(tmp_path, monkeypatch, capsys):
    def boom(ax):
        raise RuntimeError("no backend")
    cli._plot(str(tmp_path / "x.png"), boom)
    assert "not written" in capsys.readouterr().err
    assert not (tmp_path / "x.png").exists()


def test_suites_cover_all_modules():
    assert set(checks.SUITES) == {"specfun", "geometry", "field", "chaos", "variance", "nodal"}
