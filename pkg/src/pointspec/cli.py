"""Batch front end: config-driven runs with CSV/JSON outputs.

Subcommands: spectrum | eigfun | verify | multi | oracle.  All physics
lives in the config file; flags only choose paths, formats, and the
thread cap (which affects speed, never results).  Exit code 0 means the
requested computation succeeded and, for `verify`, every check passed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

FULL = "%.17e"


def _set_threads(n: int | None):
    n = n or os.environ.get("POINTSPEC_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(n))


def _out_dir(cfg, args) -> Path:
    out = Path(args.out) if args.out else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _formats(cfg, args):
    if args.format:
        return [args.format]
    return cfg.formats


def _write_csv(path: Path, header: list[str], rows):
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for c in row:
            if isinstance(c, float):
                cells.append(FULL % c)
            else:
                cells.append(str(c))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _spectrum_rows(levels, solved):
    rows = []
    for p in solved:
        lv = levels.levels[p.index]
        rows.append([
            p.index, float(lv.energy), float(p.energy_star), p.status,
            float(p.bracket[0]), float(p.bracket[1]), float(p.residual),
            float(p.phi_derivative), p.multiplicity, float(p.weight),
        ])
    return rows


SPECTRUM_HEADER = [
    "k", "E_k", "E_k_star", "status", "bracket_lo", "bracket_hi",
    "residual", "phi_derivative", "multiplicity", "weight",
]


def cmd_spectrum(cfg, args) -> int:
    from pointspec.config import prepare_spectrum
    from pointspec.solver import solve_spectrum

    levels, scheme = prepare_spectrum(cfg)
    solved = solve_spectrum(levels, scheme, cfg.k_max, cfg.tol)
    rows = _spectrum_rows(levels, solved)
    out = _out_dir(cfg, args)
    fmts = _formats(cfg, args)
    if "csv" in fmts:
        _write_csv(out / "spectrum.csv", SPECTRUM_HEADER, rows)
    if "json" in fmts:
        payload = {
            "model": {"kind": cfg.model.kind, "lengths": list(cfg.model.lengths)},
            "center": list(levels.a),
            "scheme": {"alpha_R": scheme.alpha_R, "mu_sq": scheme.mu_sq},
            "levels": [dict(zip(SPECTRUM_HEADER, r)) for r in rows],
        }
        (out / "spectrum.json").write_text(json.dumps(payload, indent=2) + "\n")
    if len(solved) < cfg.k_max + 1:
        print("note: no bound state below the base spectrum for this scheme",
              file=sys.stderr)
    print(f"wrote spectrum for {len(solved)} levels to {out}")
    return 0


def cmd_eigfun(cfg, args) -> int:
    import numpy as np

    from pointspec.config import prepare_spectrum
    from pointspec.solver import solve_spectrum
    from pointspec.wavefunction import Grid, eigenfunction, offset_grid

    k = args.level
    if k is None:
        print("eigfun requires --level K", file=sys.stderr)
        return 2
    if k < 0 or k > cfg.k_max:
        print(f"level {k} outside solved range 0..{cfg.k_max}", file=sys.stderr)
        return 2
    levels, scheme = prepare_spectrum(cfg)
    solved = solve_spectrum(levels, scheme, cfg.k_max, cfg.tol)
    match = [p for p in solved if p.index == k]
    if not match:
        print(f"level {k} has no bound state for this scheme", file=sys.stderr)
        return 1
    p = match[0]
    shape = cfg.eigfun_grid or _default_grid(cfg.model)
    if args.grid:
        shape = tuple(int(g) for g in args.grid.split("x"))
    if args.include_center:
        # Grid deliberately passing through the interaction point, to
        # exercise the excluded-sample flagging.
        axes = tuple(
            np.linspace(0.0, L, G + 2)[1:-1] if not cfg.model.periodic
            else np.linspace(0.0, L, G, endpoint=False)
            for L, G in zip(cfg.model.lengths, shape)
        )
        axes = tuple(
            np.concatenate([ax, [levels.a[d]]]) if levels.a[d] not in ax else ax
            for d, ax in enumerate(axes)
        )
        axes = tuple(np.sort(ax) for ax in axes)
        cell = float(np.prod([ax[1] - ax[0] for ax in axes]))
        grid = Grid(model=cfg.model, axes=axes, cell=cell)
    else:
        grid = offset_grid(cfg.model, shape, avoid=levels.a)
    ef = eigenfunction(p, grid, levels, precision_target=args.eig_target)
    out = _out_dir(cfg, args)
    meta = {
        "level": p.index,
        "status": p.status,
        "energy": p.energy_star,
        "norm_certificate": ef.norm_certificate,
        "cutoff_energy": ef.cutoff,
        "grid_shape": list(grid.shape),
    }
    pts = grid.points()
    vals = ef.values.ravel()
    excl = np.zeros(len(vals), dtype=bool) if ef.excluded is None else np.asarray(
        ef.excluded
    ).ravel()
    header = [f"x{d}" for d in range(cfg.model.dimension)] + ["value", "excluded_flag"]
    rows = []
    for i in range(len(vals)):
        rows.append(
            [float(c) for c in pts[i]] + [
                0.0 if np.isnan(vals[i]) else float(vals[i]), int(bool(excl[i]))
            ]
        )
    fmts = _formats(cfg, args)
    if "csv" in fmts:
        path = out / f"eigfun_{k}.csv"
        lines = ["# " + json.dumps(meta), ",".join(header)]
        for row in rows:
            lines.append(",".join(FULL % c if isinstance(c, float) else str(c) for c in row))
        path.write_text("\n".join(lines) + "\n")
    if "json" in fmts:
        payload = dict(meta)
        payload["columns"] = header
        payload["rows"] = rows
        (out / f"eigfun_{k}.json").write_text(json.dumps(payload) + "\n")
    print(f"wrote eigenfunction {k} on grid {grid.shape} to {out}")
    return 0


def _default_grid(model):
    return {1: (4096,), 2: (512, 512), 3: (48, 48, 48)}[model.dimension]


def cmd_verify(cfg, args) -> int:
    from pointspec.config import prepare_spectrum
    from pointspec.verify import run_verification

    checks = cfg.checks
    if args.checks:
        checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    grid_shape = None
    if args.grid:
        grid_shape = tuple(int(g) for g in args.grid.split("x"))
    levels, scheme = prepare_spectrum(cfg, min_cap=12.0 * 40.0)
    report = run_verification(
        levels, scheme, cfg.k_max, cfg.tol, checks,
        grid_shape=grid_shape, oracle_N=cfg.oracle_N,
    )
    out = _out_dir(cfg, args)
    (out / "verify_report.json").write_text(report.to_json() + "\n")
    for name, chk in report.checks.items():
        print(f"{'PASS' if chk.get('passed') else 'FAIL'}  {name}")
    print(f"report written to {out / 'verify_report.json'}")
    return 0 if report.passed else 1


def cmd_multi(cfg, args) -> int:
    from pointspec.solver import prepare_multi, solve_spectrum_multi

    if len(cfg.centers) < 2:
        print(
            "multi requires at least two interaction centers; "
            "use the spectrum subcommand for a single center",
            file=sys.stderr,
        )
        return 2
    from pointspec.config import prepare_spectrum

    levels0, scheme = prepare_spectrum(cfg, center=cfg.centers[0])
    prob = prepare_multi(
        cfg.model, cfg.centers, [scheme] * len(cfg.centers), levels0.modes.cap
    )
    found = solve_spectrum_multi(prob, cfg.k_max, tol=max(cfg.tol, 1e-9))
    out = _out_dir(cfg, args)
    K = len(cfg.centers)
    header = ["E_star"] + [f"c{i}" for i in range(K)] + ["residual", "condition"]
    rows = [
        [m.energy_star] + [float(c) for c in m.coefficients] + [m.residual, m.condition]
        for m in found
    ]
    fmts = _formats(cfg, args)
    if "csv" in fmts:
        _write_csv(out / "multi_spectrum.csv", header, rows)
    if "json" in fmts:
        payload = {
            "centers": cfg.centers,
            "scheme": {"alpha_R": scheme.alpha_R, "mu_sq": scheme.mu_sq},
            "levels": [dict(zip(header, r)) for r in rows],
        }
        (out / "multi_spectrum.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"wrote {len(found)} multi-center roots to {out}")
    return 0


def cmd_oracle(cfg, args) -> int:
    from pointspec.config import prepare_spectrum
    from pointspec.solver import solve_spectrum
    from pointspec.verify import oracle_diagonalize

    cutoffs = [int(c) for c in (args.cutoffs or "512,1024,2048,4096").split(",")]
    levels, scheme = prepare_spectrum(cfg, min_levels=max(cutoffs))
    solved = solve_spectrum(levels, scheme, cfg.k_max, cfg.tol)
    rows = []
    summary = {}
    prev = None
    monotone = True
    for N in cutoffs:
        res = oracle_diagonalize(N, levels, scheme, solved)
        for k, dev in sorted(res.deviations.items()):
            rows.append([N, k, solved[[p.index for p in solved].index(k)].energy_star, dev])
        summary[str(N)] = {"max_deviation": res.max_deviation,
                           "statuses_match": res.statuses_match}
        if prev is not None and res.max_deviation > prev:
            monotone = False
        prev = res.max_deviation
    out = _out_dir(cfg, args)
    fmts = _formats(cfg, args)
    if "csv" in fmts:
        _write_csv(out / "oracle_sweep.csv", ["N", "k", "E_star", "deviation"], rows)
    if "json" in fmts:
        payload = {"cutoffs": cutoffs, "monotone": monotone, "by_cutoff": summary}
        (out / "oracle_sweep.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"oracle sweep over N={cutoffs}: monotone={monotone}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pointspec",
        description="Spectra of Hamiltonians with a renormalized point interaction",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration (TOML)")
    common.add_argument("--out", help="output directory (default from config)")
    common.add_argument("--threads", type=int,
                        help="thread cap for linear algebra; speed only")
    common.add_argument("--format", choices=["csv", "json"],
                        help="restrict output to one format")
    sub.add_parser("spectrum", parents=[common],
                   help="solve the perturbed spectrum")
    eig = sub.add_parser("eigfun", parents=[common],
                         help="export one perturbed eigenfunction on a grid")
    eig.add_argument("--level", type=int, help="perturbed level index")
    eig.add_argument("--grid", help="grid shape, e.g. 4096 or 256x256")
    eig.add_argument("--include-center", action="store_true",
                     help="force the interaction point onto the grid")
    eig.add_argument("--eig-target", type=float, default=1e-6,
                     help="truncation deficit target")
    ver = sub.add_parser("verify", parents=[common],
                         help="run certification checks; exit 1 on failure")
    ver.add_argument("--checks", help="comma-separated subset of checks")
    ver.add_argument("--grid", help="override verification grid shape")
    sub.add_parser("multi", parents=[common],
                   help="solve the matrix secular problem for several centers")
    orc = sub.add_parser("oracle", parents=[common],
                         help="dense finite-rank oracle sweep")
    orc.add_argument("--cutoffs", help="comma-separated cutoffs (default 512,1024,2048,4096)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    from pointspec.config import load_config
    from pointspec.errors import ConfigError, PointSpecError

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    handler = {
        "spectrum": cmd_spectrum,
        "eigfun": cmd_eigfun,
        "verify": cmd_verify,
        "multi": cmd_multi,
        "oracle": cmd_oracle,
    }[args.command]
    try:
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PointSpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
