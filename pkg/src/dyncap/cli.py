"""Command-line driver: ``dyncap <subcommand> [options]``.

Every option can also come from the JSON file given with ``--config``.  Keys
are the option names with dashes replaced by underscores (``grid_N``,
``slab_dt``, ...), either at the top level or inside a section named after the
subcommand (``{"sweep": {...}}``).  Command-line values win over the file.

Exit codes: 0 success, 2 an invariant check failed, 3 the scaling schedule
was rejected, 4 an input or output problem (including malformed values).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .bench import ScalingSchedule, SweepSettings, initial_profile, overshoot_scan, run_sweep, validate_schedule
from .energy import audit_table, energy_identity_residual, verify_estimates
from .errors import DyncapError, ScheduleRejected
from .flux import flux_from_spec, mollify, mollify_field
from .grid import Grid, RealField
from .kinetic import LambdaGrid, decay_row, kinetic_function, lattice_truncation, truncation
from .reference import cell_averages, godunov_solve, write_fv_snapshot
from .solver import SolverConfig, solve
from .store import load_trajectory, save_trajectory, write_json

log = logging.getLogger("dyncap")

EXIT_OK, EXIT_INVARIANT, EXIT_SCHEDULE, EXIT_IO = 0, 2, 3, 4

DEFAULT_U0 = {"kind": "riemann", "S_L": 1.0, "S_R": 0.0, "x0": -0.5}


class Options:
    """Command-line values layered over the config file."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        section = config.get(args.command, {})
        self.config = {k: v for k, v in config.items() if not isinstance(v, dict) or k in ("flux", "u0")}
        self.config.update(section if isinstance(section, dict) else {})

    def __call__(self, name: str, default=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        return self.config.get(name, default)


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _json_arg(value, what: str) -> dict | None:
    """A mapping given inline as JSON, as a path to a JSON file, or as a bare kind name."""
    if value is None or isinstance(value, dict):
        return value
    text = str(value)
    if text.lstrip().startswith("{"):
        return json.loads(text)
    path = Path(text)
    if path.suffix == ".json" or path.exists():
        with open(path) as fh:
            data = json.load(fh)
        data = data.get(what, data)
        if data.get("kind") == "custom-table" and "file" in data:
            data = dict(data, file=str((path.parent / data["file"]).resolve()))
        return data
    return {"kind": text}


def _flux_spec(opt: Options) -> dict:
    return _json_arg(opt("flux"), "flux") or {"kind": "buckley_leverett", "A": 1.0}


def _u0_spec(opt: Options) -> dict:
    return _json_arg(opt("u0"), "u0") or dict(DEFAULT_U0)


# subcommands ---------------------------------------------------------------------------


def cmd_solve(opt: Options) -> int:
    eps = float(opt("eps", 0.05))
    delta = float(opt("delta", eps**3))
    n = float(opt("n_moll", eps ** 0.125))
    N, L, T = int(opt("grid_N", 512)), float(opt("box_L", 4.0)), float(opt("T", 0.25))
    grid = Grid(int(opt("dim", 1)), L, N)
    spec = _flux_spec(opt)
    flux = mollify(flux_from_spec(spec), n, eps, L)
    u0_spec = _u0_spec(opt)
    u0 = mollify_field(RealField(grid, initial_profile(u0_spec, grid)(*grid.coords())), n)
    cfg = SolverConfig(eps, delta, slab_dt=float(opt("slab_dt", 1e-2)), picard_tol=float(opt("picard_tol", 1e-10)))
    traj = solve(u0, T, cfg, flux)
    traj.meta["u0"] = u0_spec
    report = verify_estimates(traj)
    residual = float(np.max(energy_identity_residual(traj)))
    checks = {
        "estimates_pass": report.passed,
        "failures": report.failures(),
        "identity_residual_max": residual,
        "notes": report.notes,
    }
    out = save_trajectory(traj, opt("out", "run"), extra={"checks": checks})
    print(json.dumps({"out": str(out), **checks, "picard": traj.picard_stats()}, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_INVARIANT


def cmd_reference(opt: Options) -> int:
    L, T = float(opt("box_L", 4.0)), float(opt("T", 0.25))
    M = int(opt("cells", 4096))
    base = flux_from_spec(_flux_spec(opt))
    profile = initial_profile(_u0_spec(opt), Grid(1, L, int(opt("grid_N", 512))))
    times = np.arange(0.0, T, float(opt("slab_dt", T))).tolist() + [T]
    run = godunov_solve(cell_averages(profile, L, M), base, T, L=L, cfl=float(opt("cfl", 0.45)), record_times=times)
    out = Path(opt("out", "reference"))
    out.mkdir(parents=True, exist_ok=True)
    for k, state in enumerate(run.states):
        write_fv_snapshot(out / f"snap_{k:05d}.txt", state)
    write_json(out / "manifest.json", {"cells": M, "L": L, "T": T, "steps": run.steps, "flux": base.spec})
    print(json.dumps({"out": str(out), "steps": run.steps, "states": len(run.states)}))
    return EXIT_OK


def cmd_audit(opt: Options) -> int:
    traj = load_trajectory(opt("traj"))
    report = verify_estimates(traj)
    header, rows = audit_table(report)
    out = Path(opt("out", opt("traj")))
    out.mkdir(parents=True, exist_ok=True)
    bench.write_csv(out / "audit.csv", header, [dict(zip(header, r)) for r in rows])
    verdict = {
        "verdict": "pass" if report.passed else "fail",
        "failures": report.failures(),
        "identity_residual_max": float(np.max(energy_identity_residual(traj))),
        "notes": report.notes,
    }
    print(json.dumps(verdict, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_INVARIANT


def cmd_kinetic(opt: Options) -> int:
    traj = load_trajectory(opt("traj"))
    count = int(opt("lambda_points", 256))
    levels = _floats(opt("l_values", "0.25,0.5,1.0"))
    # symmetric about 0 so every [-l, l] lies on the grid
    m = max(max(abs(v) for v in traj.flux.base.lambda_window), max(levels))
    lam = LambdaGrid(-m, m, count)
    cube = kinetic_function(traj, lam)
    out = Path(opt("out", opt("traj")))
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    worst = 0.0
    for k, t in enumerate(traj.times):
        for l in levels:
            err = float(np.max(np.abs(lattice_truncation(cube, l, k).values - truncation(traj.states[k], l).values)))
            worst = max(worst, err)
            rows.append({"t": float(t), "l": l, "truncation_err": err, "within_cell": int(err <= lam.spacing)})
    bench.write_csv(out / "kinetic_cube.csv", ("t", "l", "truncation_err", "within_cell"), rows)
    row = decay_row(traj, lam)
    bench.write_csv(out / "kinetic_defects.csv", tuple(row), [row])
    ok = cube.is_monotone() and worst <= lam.spacing
    print(json.dumps({"monotone": cube.is_monotone(), "truncation_err_max": worst, "lambda_spacing": lam.spacing}))
    return EXIT_OK if ok else EXIT_INVARIANT


def _schedule(opt: Options) -> ScalingSchedule:
    return ScalingSchedule(
        a=float(opt("a", 3.0)),
        b=float(opt("b", 0.125)),
        c_delta=float(opt("c_delta", 1.0)),
        c_n=float(opt("c_n", 1.0)),
        dim=int(opt("dim", 1)),
        epsilon_list=tuple(_floats(opt("eps_list", "0.1,0.05,0.025,0.0125"))),
        regime=str(opt("regime", "custom")),
    )


def cmd_sweep(opt: Options) -> int:
    schedule = _schedule(opt)
    window = opt("window")
    u0 = _u0_spec(opt)
    settings = SweepSettings(
        flux=_flux_spec(opt),
        u0=u0,
        T=float(opt("T", 0.5)),
        N=int(opt("grid_N", 1024)),
        L=float(opt("box_L", 2.0)),
        dim=schedule.dim,
        slab_dt=float(opt("slab_dt", 1e-2)),
        reference_cells=int(opt("cells", 4096)),
        cfl=float(opt("cfl", 0.45)),
        lambda_points=int(opt("lambda_points", 256)),
        overshoot_S_L=u0.get("S_L") if u0.get("kind") == "riemann" else None,
        window=tuple(_floats(window)) if window is not None else None,
    )
    verdict = validate_schedule(schedule)
    if not verdict.valid:
        print(json.dumps({"verdict": "rejected", "violations": list(verdict.violations)}))
        return EXIT_SCHEDULE
    out = opt("out", "sweep")
    result = run_sweep(schedule, settings, workers=int(opt("workers", 1)), out_dir=out)
    bench.emit_report(result, out)
    audits = all(r["audit_pass"] == 1 for r in result.records)
    l1_ok = result.l1_nonincreasing() if verdict.regime == "iii" else True
    print(
        json.dumps(
            {
                "verdict": "pass" if audits and l1_ok else "fail",
                "regime": verdict.regime,
                "audits_pass": audits,
                "l1_nonincreasing": result.l1_nonincreasing(),
                "out": str(out),
            }
        )
    )
    return EXIT_OK if audits and l1_ok else EXIT_INVARIANT


def cmd_overshoot_scan(opt: Options) -> int:
    scan = overshoot_scan(
        taus=_floats(opt("taus", "1,2,5,10")),
        S_Ls=_floats(opt("S_L_values", "0.6,0.75,0.9")),
        eps=float(opt("eps", 0.02)),
        control_eps=_floats(opt("control_eps", "0.04,0.02,0.01")),
        n=float(opt("n_moll", 1e-3)),
        flux=_flux_spec(opt),
        N=int(opt("grid_N", 1024)),
        L=float(opt("box_L", 2.0)),
        T=float(opt("T", 0.5)),
        x0=float(opt("x0", -1.0)),
        slab_dt=float(opt("slab_dt", 1e-2)),
        workers=int(opt("workers", 1)),
    )
    out = Path(opt("out", "overshoot"))
    out.mkdir(parents=True, exist_ok=True)
    bench.write_csv(out / "overshoot.csv", bench.SCAN_COLUMNS, scan.rows)
    best, row = scan.capillary_max()
    print(json.dumps({"capillary_max": best, "at": row, "out": str(out)}, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "reference": cmd_reference,
    "audit": cmd_audit,
    "kinetic": cmd_kinetic,
    "sweep": cmd_sweep,
    "overshoot-scan": cmd_overshoot_scan,
}


def build_parser() -> argparse.ArgumentParser:
    def global_flags(default):
        parser = argparse.ArgumentParser(add_help=False, argument_default=default)
        parser.add_argument("--config", help="JSON file with option values")
        parser.add_argument("--out", help="output directory")
        parser.add_argument("--workers", type=int, help="parallel ε runs")
        parser.add_argument("-v", "--verbose", action="store_true", default=default if default is argparse.SUPPRESS else False)
        return parser

    # the flags are accepted before or after the subcommand; SUPPRESS keeps the
    # subcommand parser from overwriting values given before it
    p = argparse.ArgumentParser(prog="dyncap", description=__doc__.splitlines()[0], parents=[global_flags(None)])
    common = global_flags(argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--flux", help="flux spec: JSON file, inline JSON or a kind name")
        sp.add_argument("--u0", help="initial data spec: JSON file or inline JSON")
        sp.add_argument("--eps", type=float)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--n-moll", dest="n_moll", type=float)
        sp.add_argument("--grid-N", dest="grid_N", type=int)
        sp.add_argument("--box-L", dest="box_L", type=float)
        sp.add_argument("--T", dest="T", type=float)
        sp.add_argument("--slab-dt", dest="slab_dt", type=float)

    sp = sub.add_parser("solve", parents=[common], help="solve one regularized problem")
    run_flags(sp)
    sp = sub.add_parser("reference", parents=[common], help="Godunov entropy reference")
    run_flags(sp)
    sp.add_argument("--cells", type=int)
    sp.add_argument("--cfl", type=float)

    sp = sub.add_parser("audit", parents=[common], help="check the energy estimates of a stored run")
    sp.add_argument("--traj", help="trajectory directory")
    sp.add_argument("traj_pos", nargs="?", metavar="TRAJ")

    sp = sub.add_parser("kinetic", parents=[common], help="kinetic function and defect norms of a stored run")
    sp.add_argument("--traj", help="trajectory directory")
    sp.add_argument("traj_pos", nargs="?", metavar="TRAJ")
    sp.add_argument("--lambda-points", dest="lambda_points", type=int)
    sp.add_argument("--l-values", dest="l_values", help="comma-separated truncation levels")

    sp = sub.add_parser("sweep", parents=[common], help="ε-sweep along a scaling schedule")
    run_flags(sp)
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--c-delta", dest="c_delta", type=float)
    sp.add_argument("--c-n", dest="c_n", type=float)
    sp.add_argument("--eps-list", dest="eps_list")
    sp.add_argument("--regime", choices=["i", "ii", "iii", "custom"])
    sp.add_argument("--cells", type=int)
    sp.add_argument("--cfl", type=float)
    sp.add_argument("--lambda-points", dest="lambda_points", type=int)
    sp.add_argument("--window", help="lo,hi of the comparison window")

    sp = sub.add_parser("overshoot-scan", parents=[common], help="overshoot of capillary Riemann runs")
    sp.add_argument("--flux")
    sp.add_argument("--taus")
    sp.add_argument("--S-L-values", dest="S_L_values")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--control-eps", dest="control_eps")
    sp.add_argument("--n-moll", dest="n_moll", type=float)
    sp.add_argument("--grid-N", dest="grid_N", type=int)
    sp.add_argument("--box-L", dest="box_L", type=float)
    sp.add_argument("--T", dest="T", type=float)
    sp.add_argument("--x0", type=float)
    sp.add_argument("--slab-dt", dest="slab_dt", type=float)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which would read as an invariant failure
        return EXIT_IO if exc.code else EXIT_OK
    if getattr(args, "traj_pos", None) and not args.traj:
        args.traj = args.traj_pos
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = {}
        if args.config:
            with open(args.config) as fh:
                config = json.load(fh)
        opt = Options(args, config)
        if args.command in ("audit", "kinetic") and opt("traj") is None:
            print("error: a trajectory directory is required", file=sys.stderr)
            return EXIT_IO
        return COMMANDS[args.command](opt)
    except ScheduleRejected as exc:
        print(f"schedule rejected: {exc}", file=sys.stderr)
        return EXIT_SCHEDULE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DyncapError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        # malformed option values are input problems
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
