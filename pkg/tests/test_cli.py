import json
import subprocess
import sys

import numpy as np
import pytest

PI = np.pi


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "mftorus.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "counts.cfg").write_text(
        "[torus]\nn1 = 128\n[potential]\nformula = cos(2*pi*x1)\n"
        f"[run]\nlambda = {12 * PI!r}\n"
    )
    (tmp_path / "verify.cfg").write_text(
        "[verify]\nkmax = 3\nnmax = 2\nmmax = 2\ngmax = 2\n"
    )
    (tmp_path / "solve.cfg").write_text(
        "[torus]\nn1 = 64\n[potential]\nformula = cos(2*pi*x1)\n"
        "[singular]\npoint = 0.0 0.5 0.5\n"
        f"[run]\nlambda = {4 * PI!r}\ninitial = bubble\nmu = 30\n"
        "barycenter = 1.0 0.0 0.0\n"
    )
    return tmp_path


def test_counts_reports_expected_topology(workdir):
    res = run_cli(["counts", "--config", "counts.cfg", "--out", "o1"], workdir)
    assert res.returncode == 0, res.stderr
    payload = json.loads(res.stdout)["results"]
    assert payload["topology"] == {"N": 1, "M": 0, "g": [1]}
    assert payload["k"] == 1
    assert payload["sum"] == 1
    assert payload["gate_general"] is True
    assert payload["oracle_matches"] is True
    assert (workdir / "o1" / "counts.csv").exists()


def test_counts_critical_lambda_exits_nonzero(workdir):
    (workdir / "crit.cfg").write_text(
        "[torus]\nn1 = 128\n[potential]\nformula = cos(2*pi*x1)\n"
        f"[run]\nlambda = {16 * PI!r}\n"
    )
    res = run_cli(["counts", "--config", "crit.cfg", "--out", "o2"], workdir)
    assert res.returncode != 0
    assert "LambdaCritical" in res.stderr


def test_solve_domain_violation_exits_nonzero(workdir):
    (workdir / "bad.cfg").write_text(
        "[torus]\nn1 = 64\n[potential]\nformula = cos(2*pi*x1)\n"
        "[singular]\npoint = 0.0 0.5 0.5\n"
        f"[run]\nlambda = {4 * PI!r}\ninitial = zero\n"
    )
    res = run_cli(["solve", "--config", "bad.cfg", "--out", "o3"], workdir)
    assert res.returncode != 0
    assert "DomainViolation" in res.stderr


def test_unknown_config_key_exits_nonzero(workdir):
    (workdir / "typo.cfg").write_text("[torus]\nl3 = 2\n")
    res = run_cli(["counts", "--config", "typo.cfg", "--out", "o4"], workdir)
    assert res.returncode != 0
    assert "ConfigError" in res.stderr


def test_verify_runs_clean(workdir):
    res = run_cli(["verify", "--config", "verify.cfg", "--out", "o5"], workdir)
    assert res.returncode == 0, res.stderr
    payload = json.loads(res.stdout)["results"]
    assert payload["ok"] is True
    assert payload["mismatches"] == []
    assert payload["checked"] > 30


def test_counts_and_verify_deterministic(workdir):
    outs = []
    csvs = []
    for tag in ("a", "b"):
        res = run_cli(["counts", "--config", "counts.cfg", "--out", f"d{tag}"], workdir)
        assert res.returncode == 0
        outs.append(res.stdout)
        csvs.append((workdir / f"d{tag}" / "counts.csv").read_bytes())
    assert outs[0] == outs[1]
    assert csvs[0] == csvs[1]
    vouts = []
    for tag in ("c", "d"):
        res = run_cli(["verify", "--config", "verify.cfg", "--out", f"d{tag}"], workdir)
        vouts.append(res.stdout)
    assert vouts[0] == vouts[1]


def test_solve_csv_revalidates_from_dump(workdir):
    res = run_cli(["solve", "--config", "solve.cfg", "--out", "o6"], workdir)
    assert res.returncode == 0, res.stderr
    # recompute the residual from the dumped field; it must match the CSV
    from mftorus import EnergyContext, gradient
    from mftorus.config import parse_config
    from mftorus.singular import effective_potential_field
    from mftorus.surface import load_field

    cfg = parse_config(workdir / "solve.cfg")
    u = load_field(workdir / "o6" / "solution.field")
    pot = cfg.potential(u.grid)
    cones = cfg.cones(pot)
    kt = effective_potential_field(cones, pot.field, u.grid)
    ctx = EnergyContext(grid=u.grid, lam=float(cfg.run["lambda"]), weight=kt, cones=cones)
    res_norm = float(np.max(np.abs(gradient(ctx, u).values)))
    csv_row = (workdir / "o6" / "solution.csv").read_text().splitlines()[1]
    reported = float(csv_row.split(",")[2])
    assert res_norm == pytest.approx(reported, abs=1e-12)
    # the record payload agrees as well
    payload = json.loads(res.stdout)["results"]["record"]
    assert payload["residual"] == pytest.approx(reported, rel=1e-12)


def test_sweep_csv_written(workdir):
    (workdir / "sweep.cfg").write_text(
        "[torus]\nn1 = 64\n[potential]\nformula = cos(2*pi*x1)\n"
        "[singular]\npoint = 0.0 0.5 0.5\n"
        f"[run]\nlambda_from = {4 * PI!r}\nlambda_to = {5 * PI!r}\nsteps = 2\n"
        "initial = bubble\nmu = 30\nbarycenter = 1.0 0.0 0.0\n"
        "[solver]\ncompute_index = false\n"
    )
    res = run_cli(["sweep", "--config", "sweep.cfg", "--out", "o7"], workdir)
    assert res.returncode == 0, res.stderr
    lines = (workdir / "o7" / "branch.csv").read_text().splitlines()
    assert lines[0].startswith("lambda,energy,residual")
    assert len(lines) == 4  # seed + 2 steps
    payload = json.loads(res.stdout)["results"]
    assert payload["termination"] == "converged"
