import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "pointspec", *args],
        capture_output=True, text=True,
    )


def write_config(tmp_path, body, name="run.toml"):
    p = tmp_path / name
    p.write_text(body)
    return p


INTERVAL_CFG = """
[model]
kind = "interval-Dirichlet-1D"
lengths = [3.14159265358979312]

[interaction]
center = [1.0]

[scheme]
alpha_R = 1.0
mu_sq = 1.0

[solver]
k_max = 4
tol = 1e-10

[output]
directory = "{out}"
"""


def test_spectrum_table_and_interlacing(tmp_path):
    cfg = write_config(tmp_path, INTERVAL_CFG.format(out=tmp_path / "out"))
    r = run_cli("spectrum", "--config", str(cfg))
    assert r.returncode == 0, r.stderr
    lines = (tmp_path / "out" / "spectrum.csv").read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, l.split(","))) for l in lines[1:]]
    assert len(rows) == 5
    for row in rows:
        if row["status"] == "shifted":
            assert float(row["E_k_star"]) < float(row["E_k"])


def test_nodal_demo_rows(tmp_path):
    r = run_cli("spectrum", "--config", str(CONFIGS / "interval_nodal.toml"),
                "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()[1:]
    nodal = [l for l in lines if "unchanged-nodal" in l]
    ks = [int(l.split(",")[0]) for l in nodal]
    assert ks == [1, 3, 5]


def test_missing_field_names_it(tmp_path):
    cfg = write_config(tmp_path, """
[model]
kind = "interval-Dirichlet-1D"
lengths = [3.14159265358979312]

[interaction]
center = [1.0]

[scheme]
alpha_R = 1.0
""")
    r = run_cli("spectrum", "--config", str(cfg))
    assert r.returncode == 2
    assert "scheme.mu_sq" in r.stderr


def test_center_outside_domain_rejected(tmp_path):
    cfg = write_config(tmp_path, INTERVAL_CFG.format(out=tmp_path).replace(
        "center = [1.0]", "center = [9.0]"))
    r = run_cli("spectrum", "--config", str(cfg))
    assert r.returncode == 2
    assert "outside" in r.stderr


def test_json_roundtrip_exact(tmp_path):
    cfg = write_config(tmp_path, INTERVAL_CFG.format(out=tmp_path / "o"))
    assert run_cli("spectrum", "--config", str(cfg), "--format", "json").returncode == 0
    payload = json.loads((tmp_path / "o" / "spectrum.json").read_text())
    from pointspec.config import load_config, prepare_spectrum
    from pointspec.solver import solve_spectrum

    c = load_config(cfg)
    levels, scheme = prepare_spectrum(c)
    solved = solve_spectrum(levels, scheme, c.k_max, c.tol)
    for row, p in zip(payload["levels"], solved):
        assert row["E_k_star"] == p.energy_star  # repr round-trip is exact
        assert row["residual"] == p.residual


def test_byte_identical_reruns(tmp_path):
    cfg = write_config(tmp_path, INTERVAL_CFG.format(out=tmp_path / "a"))
    assert run_cli("spectrum", "--config", str(cfg)).returncode == 0
    first = (tmp_path / "a" / "spectrum.csv").read_bytes()
    assert run_cli("spectrum", "--config", str(cfg)).returncode == 0
    assert (tmp_path / "a" / "spectrum.csv").read_bytes() == first


def test_eigfun_export_with_metadata(tmp_path):
    r = run_cli("eigfun", "--config", str(CONFIGS / "interval.toml"),
                "--level", "0", "--out", str(tmp_path), "--grid", "512")
    assert r.returncode == 0, r.stderr
    lines = (tmp_path / "eigfun_0.csv").read_text().splitlines()
    meta = json.loads(lines[0][2:])
    assert meta["level"] == 0
    assert meta["norm_certificate"] < 1e-5
    assert lines[1] == "x0,value,excluded_flag"
    # nodal level export equals the base mode
    r = run_cli("eigfun", "--config", str(CONFIGS / "interval_nodal.toml"),
                "--level", "1", "--out", str(tmp_path), "--grid", "256")
    assert r.returncode == 0, r.stderr
    rows = (tmp_path / "eigfun_1.csv").read_text().splitlines()[2:]
    xs = np.array([float(l.split(",")[0]) for l in rows])
    vals = np.array([float(l.split(",")[1]) for l in rows])
    np.testing.assert_allclose(vals, np.sqrt(2 / np.pi) * np.sin(2 * xs), atol=1e-12)


def test_eigfun_grid_through_center_flags_rows(tmp_path):
    r = run_cli("eigfun", "--config", str(CONFIGS / "rectangle.toml"),
                "--level", "0", "--out", str(tmp_path), "--grid", "24x24",
                "--include-center", "--eig-target", "1e-3")
    assert r.returncode == 0, r.stderr
    lines = (tmp_path / "eigfun_0.csv").read_text().splitlines()[2:]
    flagged = [l for l in lines if l.endswith(",1")]
    assert len(flagged) == 1


def test_eigfun_out_of_range_level(tmp_path):
    r = run_cli("eigfun", "--config", str(CONFIGS / "interval.toml"),
                "--level", "99", "--out", str(tmp_path))
    assert r.returncode == 2


def test_verify_pass_and_exit_zero(tmp_path):
    r = run_cli("verify", "--config", str(CONFIGS / "interval.toml"),
                "--checks", "scheme-invariance,krein", "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    rep = json.loads((tmp_path / "verify_report.json").read_text())
    assert rep["passed"] is True


def test_verify_coarse_grid_fails_cleanly(tmp_path):
    r = run_cli("verify", "--config", str(CONFIGS / "interval.toml"),
                "--checks", "gram", "--grid", "24", "--out", str(tmp_path))
    assert r.returncode == 1
    assert "grid too coarse" in r.stderr or "refine the grid" in r.stderr


def test_multi_symmetric_pair_cli(tmp_path):
    r = run_cli("multi", "--config", str(CONFIGS / "multi_interval.toml"),
                "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    lines = (tmp_path / "multi_spectrum.csv").read_text().splitlines()[1:]
    c0 = [abs(float(l.split(",")[1])) for l in lines]
    np.testing.assert_allclose(c0, 1 / np.sqrt(2), atol=1e-9)


def test_multi_rejects_single_center(tmp_path):
    r = run_cli("multi", "--config", str(CONFIGS / "interval.toml"),
                "--out", str(tmp_path))
    assert r.returncode == 2
    assert "spectrum" in r.stderr  # points the user at the right subcommand


def test_oracle_sweep_monotone(tmp_path):
    r = run_cli("oracle", "--config", str(CONFIGS / "interval.toml"),
                "--cutoffs", "64,128,256", "--out", str(tmp_path))
    assert r.returncode == 0, r.stderr
    rep = json.loads((tmp_path / "oracle_sweep.json").read_text())
    assert rep["monotone"] is True
