"""Batch front end: `mftorus <command> --config file [--out dir]`.

Commands
--------
counts : homology dimension table, critical values, gate verdicts
solve  : one critical point (minimization below 8 pi, Newton above)
sweep  : coupling continuation with per-step diagnostics CSV
bubble : concentration-profile energies and ball masses versus sharpness
verify : exact equivalence of the two homology routes over a parameter box

The JSON report printed to stdout is deterministic for a fixed config and
seed; wall-clock timing goes only into ``report.json`` in the output
directory.  All error paths exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .energy import Barycenter, EnergyContext, bubble, energy, gradient, mass_in_ball
from .errors import ConfigError, LambdaCritical, MFTorusError
from .homology import (
    bar_betti_oracle,
    betti_closed,
    d_q_closed,
    existence_gate,
    multiplicity_8pi16pi,
    multiplicity_general,
)
from .singular import (
    SurfaceTopology,
    classify_sign_regions,
    critical_set,
    effective_potential_field,
    j_lambda,
)
from .solver import (
    SolverOptions,
    branch_csv_rows,
    continue_branch,
    minimize,
    newton_solve,
    quantization_check,
)
from .surface import save_field

__all__ = ["main"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mftorus", description="mean field laboratory on the flat torus"
    )
    parser.add_argument("command", choices=["counts", "solve", "sweep", "bubble", "verify"])
    parser.add_argument("--config", required=True, help="path to the run configuration")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--resolution", type=int, default=None, help="override n1 = n2")
    parser.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    args = parser.parse_args(argv)

    t0 = time.perf_counter()
    try:
        cfg = parse_config(args.config)
        if args.resolution is not None:
            cfg.n1 = cfg.n2 = args.resolution
        seed = args.seed if args.seed is not None else int(cfg.run.get("seed", "0"))
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        results = _COMMANDS[args.command](cfg, seed, outdir)
    except MFTorusError as err:
        payload = {"error": type(err).__name__, "message": str(err)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1

    report = {
        "command": args.command,
        "version": __version__,
        "seed": seed,
        "config": _echo_config(cfg),
        "results": results,
    }
    text = json.dumps(report, sort_keys=True, indent=2, default=_json_default)
    print(text)
    report["wall_clock_s"] = time.perf_counter() - t0
    with open(outdir / "report.json", "w") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2, default=_json_default))
    ok = results.get("ok", True)
    return 0 if ok else 1


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


def _echo_config(cfg: RunConfig) -> dict:
    return {
        "source": cfg.source,
        "torus": [cfg.torus.L1, cfg.torus.L2],
        "resolution": [cfg.n1, cfg.n2],
        "potential": cfg.potential_formula or cfg.potential_file,
        "cones": [list(row) for row in cfg.cone_rows],
        "run": cfg.run,
        "solver": cfg.solver,
        "verify": cfg.verify,
    }


def _require(cfg: RunConfig, key: str) -> str:
    if key not in cfg.run:
        raise ConfigError(f"{cfg.source}: [run] {key} is required for this command")
    return cfg.run[key]


def _solver_options(cfg: RunConfig) -> SolverOptions:
    kw = {}
    conv = {
        "residual_tol": float,
        "max_newton": int,
        "krylov_tol": float,
        "max_flow_steps": int,
        "blowup_threshold": float,
        "coarse_first": lambda s: s.lower() in ("1", "true", "yes"),
        "compute_index": lambda s: s.lower() in ("1", "true", "yes"),
    }
    for key, value in cfg.solver.items():
        kw[key] = conv[key](value)
    return SolverOptions(**kw)


def _topology(cfg: RunConfig):
    """Topology from the override or from sign-region classification."""
    if cfg.topology_override is not None:
        return cfg.topology_override, None
    pot = cfg.potential()
    pot.validate(cfg.cones(pot))
    regions = classify_sign_regions(pot)
    return regions.topology, pot


def _context(cfg: RunConfig, lam: float) -> EnergyContext:
    grid = cfg.grid()
    pot = cfg.potential(grid)
    cones = cfg.cones(pot)
    pot.validate(cones)
    cones.validate_for_solver()
    kt = effective_potential_field(cones, pot.field, grid)
    return EnergyContext(grid=grid, lam=lam, weight=kt, cones=cones)


def _gamma(cfg: RunConfig, grid) -> float:
    if "gamma" in cfg.run:
        return float(cfg.run["gamma"])
    return min(grid.torus.L1, grid.torus.L2) / 16.0


def _barycenter(cfg: RunConfig) -> Barycenter:
    txt = cfg.run.get("barycenter", "")
    if not txt.strip():
        raise ConfigError(f"{cfg.source}: [run] barycenter is required")
    weights, points = [], []
    for part in txt.split(";"):
        bits = part.split()
        if len(bits) != 3:
            raise ConfigError(
                f"{cfg.source}: barycenter entries are 't x1 x2', got {part!r}"
            )
        weights.append(float(bits[0]))
        points.append((float(bits[1]), float(bits[2])))
    return Barycenter(tuple(weights), tuple(points))


def _initial_field(cfg: RunConfig, ctx: EnergyContext):
    kind = cfg.run.get("initial", "zero").strip().lower()
    if kind == "zero":
        return ctx.grid.zeros()
    if kind == "bubble":
        mus = [float(m) for m in cfg.run.get("mu", "100").split()]
        return bubble(ctx, _barycenter(cfg), mus[0], _gamma(cfg, ctx.grid))
    raise ConfigError(f"{cfg.source}: unknown initial state {kind!r}")


# ---------------------------------------------------------------------------


def cmd_counts(cfg: RunConfig, seed: int, outdir: Path) -> dict:
    lam = float(_require(cfg, "lambda"))
    topo, pot = _topology(cfg)
    alphas = [row[2] for row in cfg.cone_rows]
    if pot is not None:
        cones = cfg.cones(pot)
    else:
        cones = cfg.cones()
    pos_alphas = [p.alpha for p in cones.positive_points]
    crit = critical_set(pos_alphas, lam_max=lam + 16 * np.pi)
    k = int(lam // (8 * np.pi))
    if "k" in cfg.run:
        k = int(cfg.run["k"])
    jpts = j_lambda(cones, lam)
    gates = existence_gate(lam, k, topo, jpts, crit)  # raises LambdaCritical
    table = [(q, d_q_closed(k, topo, q)) for q in range(2 * k)]
    total = sum(d for _, d in table)
    rows = ["q,d_q"] + [f"{q},{d}" for q, d in table if d or q <= 2 * k - 1]
    (outdir / "counts.csv").write_text("\n".join(rows) + "\n")
    oracle = bar_betti_oracle(topo, k)
    return {
        "lambda": lam,
        "k": k,
        "topology": {"N": topo.N, "M": topo.M, "g": list(topo.g)},
        "table": [[q, d] for q, d in table],
        "sum": total,
        "oracle_matches": all(oracle[q] == d for q, d in table),
        "critical_values_below_lambda": [v for v in crit.tolist() if v <= lam],
        "j_lambda": [[p.x1, p.x2, p.alpha] for p in jpts],
        "gate_general": gates.general,
        "gate_eight_sixteen": gates.eight_sixteen,
        "multiplicity_general": multiplicity_general(k, topo),
        "multiplicity_8pi16pi": multiplicity_8pi16pi(topo, len(jpts)),
    }


def _record_payload(rec) -> dict:
    return {
        "lambda": rec.lam,
        "residual": rec.residual,
        "energy": {
            "total": rec.energy.total,
            "dirichlet": rec.energy.dirichlet,
            "linear": rec.energy.linear,
            "log_term": rec.energy.log_term,
        },
        "morse_index": rec.morse_index,
        "max_u": rec.max_u,
        "min_u": rec.min_u,
        "kato": {"min_v": rec.kato.min_v, "l1": rec.kato.l1, "l3": rec.kato.l3},
        "concentration": {
            "peak": list(rec.concentration.peak),
            "mass_small_ball": rec.concentration.mass_small_ball,
            "nearest_critical": rec.concentration.nearest_critical,
            "relative_gap": rec.concentration.relative_gap,
        },
        "iterations": rec.iterations,
    }


def cmd_solve(cfg: RunConfig, seed: int, outdir: Path) -> dict:
    lam = float(_require(cfg, "lambda"))
    ctx = _context(cfg, lam)
    opts = _solver_options(cfg)
    u0 = _initial_field(cfg, ctx)
    if lam < 8 * np.pi:
        rec = minimize(ctx, opts, u0)
    else:
        rec = newton_solve(ctx, opts, u0)
    save_field(rec.field, outdir / "solution.field")
    from .solver import BranchRecord

    rows = branch_csv_rows(BranchRecord(records=[rec]))
    (outdir / "solution.csv").write_text("\n".join(rows) + "\n")
    return {"record": _record_payload(rec), "field_dump": "solution.field"}


def cmd_sweep(cfg: RunConfig, seed: int, outdir: Path) -> dict:
    lam_from = float(_require(cfg, "lambda_from"))
    lam_to = float(_require(cfg, "lambda_to"))
    steps = int(_require(cfg, "steps"))
    ctx = _context(cfg, lam_from)
    opts = _solver_options(cfg)
    u0 = _initial_field(cfg, ctx)
    seed_rec = minimize(ctx, opts, u0) if lam_from < 8 * np.pi else newton_solve(ctx, opts, u0)
    branch = continue_branch(ctx, seed_rec, lam_to, steps, opts)
    rows = branch_csv_rows(branch)
    (outdir / "branch.csv").write_text("\n".join(rows) + "\n")
    save_field(branch.records[-1].field, outdir / "last.field")
    out = {
        "termination": branch.termination,
        "detail": branch.detail,
        "steps_completed": len(branch.records) - 1,
        "records": [_record_payload(r) for r in branch.records],
    }
    if branch.termination == "blow-up":
        radii = [float(r) for r in cfg.run.get("radii", "").split()] or [
            0.05 * min(cfg.torus.L1, cfg.torus.L2) * s for s in (1.0, 2.0, 3.0)
        ]
        q = quantization_check(ctx, branch, radii)
        out["quantization"] = {
            "lambda": q.lam,
            "shift": q.shift,
            "peak": list(q.peak),
            "masses": [list(m) for m in q.masses],
            "nearest_critical": q.nearest_critical,
            "relative_gap": q.relative_gap,
        }
    return out


def cmd_bubble(cfg: RunConfig, seed: int, outdir: Path) -> dict:
    lam = float(_require(cfg, "lambda"))
    ctx = _context(cfg, lam)
    sigma = _barycenter(cfg)
    gamma = _gamma(cfg, ctx.grid)
    mus = [float(m) for m in _require(cfg, "mu").split()]
    rows = ["mu,energy," + ",".join(f"mass_{i}" for i in range(len(sigma.points)))]
    results = []
    for mu in mus:
        phi = bubble(ctx, sigma, mu, gamma)
        val = energy(ctx, phi)
        masses = [mass_in_ball(ctx, phi, pt, 3 * gamma) for pt in sigma.points]
        rows.append(",".join([repr(float(mu)), repr(float(val.total))] + [repr(float(m)) for m in masses]))
        results.append({"mu": mu, "energy": val.total, "masses": masses})
    (outdir / "bubble.csv").write_text("\n".join(rows) + "\n")
    decreasing = all(
        results[i + 1]["energy"] < results[i]["energy"] for i in range(len(results) - 1)
    )
    return {"gamma": gamma, "rows": results, "energy_strictly_decreasing": decreasing}


def cmd_verify(cfg: RunConfig, seed: int, outdir: Path) -> dict:
    kmax = int(cfg.verify.get("kmax", 4))
    nmax = int(cfg.verify.get("nmax", 2))
    mmax = int(cfg.verify.get("mmax", 2))
    gmax = int(cfg.verify.get("gmax", 2))
    import itertools

    checked = 0
    mismatches = []
    for k in range(1, kmax + 1):
        for n in range(0, nmax + 1):
            for m in range(0, mmax + 1):
                if n + m < 1:
                    continue
                for gs in itertools.combinations_with_replacement(range(1, gmax + 1), n):
                    topo = SurfaceTopology(N=n, M=m, g=gs)
                    oracle = bar_betti_oracle(topo, k)
                    closed = betti_closed(k, topo)
                    checked += 1
                    if oracle != closed:
                        mismatches.append(
                            {"k": k, "N": n, "M": m, "g": list(gs),
                             "oracle": dict(oracle.items()),
                             "closed": dict(closed.items())}
                        )
                    # point-absorption recursion
                    if k >= 2:
                        topo_plus = SurfaceTopology(N=n, M=m + 1, g=gs)
                        bad = [
                            q
                            for q in range(2 * k)
                            if d_q_closed(k, topo_plus, q)
                            != d_q_closed(k, topo, q)
                            + (d_q_closed(k - 1, topo, q - 1) if q >= 1 else 0)
                        ]
                        if bad:
                            mismatches.append(
                                {"k": k, "N": n, "M": m, "g": list(gs),
                                 "absorption_failed_at": bad}
                            )
    rows = ["checked,mismatches", f"{checked},{len(mismatches)}"]
    (outdir / "verify.csv").write_text("\n".join(rows) + "\n")
    return {
        "box": {"kmax": kmax, "nmax": nmax, "mmax": mmax, "gmax": gmax},
        "checked": checked,
        "mismatches": mismatches,
        "ok": not mismatches,
    }


_COMMANDS = {
    "counts": cmd_counts,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "bubble": cmd_bubble,
    "verify": cmd_verify,
}


if __name__ == "__main__":
    sys.exit(main())
