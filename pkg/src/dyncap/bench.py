r"""Scaling schedules, ε-sweeps, overshoot scans and their reports.

A :class:`ScalingSchedule` ties the capillarity and mollification widths to
the diffusion: ``δ = c_δ ε^a`` and ``n = c_n ε^b``.  :func:`validate_schedule`
checks the exponent inequalities of the three limit regimes, and
:func:`run_sweep` carries one schedule through solve → audit → kinetic probe →
comparison with the entropy reference, one ε at a time.

Sweeps are deterministic: quadratures are fixed, nothing is random, and CSV
floats are written with ``repr`` so reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .energy import energy_identity_residual, verify_estimates
from .errors import ScheduleRejected
from .flux import FluxModel, flux_from_spec, mollify, mollify_field
from .grid import Grid, RealField, read_snapshot, write_snapshot
from .kinetic import LambdaGrid, decay_row, summarize_decay
from .reference import FVState, cell_averages, godunov_solve, l1_distance
from .solver import SolverConfig, Trajectory, solve
from .store import write_json

log = logging.getLogger(__name__)

__all__ = [
    "ScalingSchedule",
    "ScheduleVerdict",
    "validate_schedule",
    "initial_profile",
    "smoothed_riemann",
    "SweepSettings",
    "SweepResult",
    "run_sweep",
    "overshoot_metric",
    "overshoot_scan",
    "OvershootScan",
    "emit_report",
    "SWEEP_COLUMNS",
    "SCAN_COLUMNS",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


# schedules -------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingSchedule:
    a: float
    b: float
    c_delta: float = 1.0
    c_n: float = 1.0
    dim: int = 1
    epsilon_list: tuple[float, ...] = ()
    regime: str = "custom"

    def __post_init__(self):
        if self.regime not in ("i", "ii", "iii", "custom"):
            raise ValueError(f"unknown regime tag {self.regime!r}")
        if not (self.c_delta > 0 and self.c_n > 0):
            raise ValueError("schedule constants must be positive")
        eps = tuple(float(e) for e in self.epsilon_list)
        if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon_list must be positive and strictly decreasing")
        object.__setattr__(self, "epsilon_list", eps)

    def delta(self, eps: float) -> float:
        return self.c_delta * eps**self.a

    def n(self, eps: float) -> float:
        return self.c_n * eps**self.b

    def to_dict(self) -> dict:
        return asdict(self) | {"epsilon_list": list(self.epsilon_list)}


@dataclass(frozen=True)
class ScheduleVerdict:
    valid: bool
    regime: str | None
    satisfied: tuple[str, ...]
    violations: tuple[str, ...]
    runtime_requirements: tuple[str, ...]
    margins: dict

    def __bool__(self) -> bool:
        return self.valid


def _regime_checks(a: float, b: float, d: int) -> dict[str, list[tuple[str, bool]]]:
    m_i = a / 2 - 1 - b * (d + 2)
    m_ii = a / 2 - 0.5 - b * (d / 2 + 2)
    vanish = ("n(ε) → 0 needs b > 0", b > 0)
    return {
        "i": [("δ = o(ε²) needs a > 2", a > 2), (f"a/2 − 1 − b(d+2) = {m_i:.6g} must be > 0", m_i > 0), vanish],
        "ii": [("δ = O(ε²) needs a ≥ 2", a >= 2), (f"a/2 − 1/2 − b(d/2+2) = {m_ii:.6g} must be > 0", m_ii > 0), vanish],
        "iii": [("δ = o(ε²) needs a > 2", a > 2), (f"a/2 − 1/2 − b(d/2+2) = {m_ii:.6g} must be > 0", m_ii > 0), vanish],
    }


def validate_schedule(s: ScalingSchedule) -> ScheduleVerdict:
    """Check the exponent inequalities; pure and total.

    A tagged schedule is checked against its own regime.  An untagged
    (``custom``) schedule gets the strongest regime it satisfies, in the order
    iii, i, ii.
    """
    checks = _regime_checks(s.a, s.b, s.dim)
    satisfied = tuple(r for r in ("iii", "i", "ii") if all(ok for _, ok in checks[r]))
    margins = {
        "i": s.a / 2 - 1 - s.b * (s.dim + 2),
        "ii": s.a / 2 - 0.5 - s.b * (s.dim / 2 + 2),
    }
    if s.regime == "custom":
        regime = satisfied[0] if satisfied else None
        violations = () if regime else tuple(msg for r in ("iii", "i", "ii") for msg, ok in checks[r] if not ok)
    else:
        regime = s.regime if s.regime in satisfied else None
        violations = tuple(msg for msg, ok in checks[s.regime] if not ok)
    runtime = ("bounded ∂λf",) if regime == "ii" else ()
    return ScheduleVerdict(regime is not None, regime, satisfied, tuple(dict.fromkeys(violations)), runtime, margins)


# initial data -----------------------------------------------------------------------


def smoothed_riemann(x, S_L: float, S_R: float, L: float, x0: float, width: float):
    """Periodic smoothed step: ``S_L`` on ``(-L, x0)``, ``S_R`` on ``(x0, L)``.

    Both the jump at ``x0`` and the one at the periodic seam ``±L`` are tanh
    fronts of the given width.
    """
    x = np.asarray(x, dtype=float)
    chi = 0.5 * (np.tanh((x + L) / width) - np.tanh((x - x0) / width)) + 0.5 * (1 + np.tanh((x - L) / width))
    return S_R + (S_L - S_R) * chi


def initial_profile(spec: dict, grid: Grid):
    """A callable ``u0(x)`` for a data spec, evaluated on the box of ``grid``.

    Kinds: ``riemann`` (``S_L``, ``S_R``, ``x0``, ``width_cells`` = 4),
    ``bump`` (``base``, ``amp``, ``center``, ``width``) and ``sine``
    (``amp``, ``k``).
    """
    kind = spec.get("kind", "riemann")
    L = grid.L
    if kind == "riemann":
        w = spec.get("width_cells", 4) * grid.h
        return lambda x: smoothed_riemann(x, spec["S_L"], spec["S_R"], L, spec.get("x0", 0.0), w)
    if kind == "bump":
        return lambda x: spec.get("base", 0.0) + spec.get("amp", 1.0) * np.exp(
            -(((x - spec.get("center", 0.0)) / spec.get("width", 0.5)) ** 2)
        )
    if kind == "sine":
        return lambda x: spec.get("base", 0.0) + spec.get("amp", 1.0) * np.sin(spec.get("k", 1) * np.pi * x / L)
    raise ValueError(f"unknown initial data kind {kind!r}")


def _sample(profile, grid: Grid) -> RealField:
    return RealField(grid, profile(*grid.coords()))


# sweeps -----------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSettings:
    """Everything a sweep needs besides the schedule."""

    flux: dict
    u0: dict
    T: float
    N: int = 512
    L: float = 4.0
    dim: int = 1
    slab_dt: float = 1e-2
    picard_tol: float = 1e-10
    reference_cells: int = 4096
    cfl: float = 0.45
    lambda_points: int = 256
    audit: bool = True
    kinetic: bool = True
    reference: bool = True
    overshoot_S_L: float | None = None
    window: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["window"] is not None:
            d["window"] = list(d["window"])
        return d


SWEEP_COLUMNS = (
    "eps",
    "delta",
    "n",
    "l1_reference",
    "overshoot",
    "audit_pass",
    "identity_residual_max",
    "gamma1_proxy",
    "gamma2_proxy",
    "gamma3_l1",
    "gamma4_l1",
    "gamma1_theory",
    "gamma2_theory",
    "gamma4_theory",
    "picard_iterations",
    "subslabs",
)


@dataclass
class SweepResult:
    schedule: ScalingSchedule
    settings: SweepSettings
    records: list[dict]
    provenance: dict
    verdict: ScheduleVerdict | None = None
    decay: object = None
    trajectories: list = field(default_factory=list, repr=False)

    def column(self, name: str) -> list:
        return [r[name] for r in self.records]

    def l1_nonincreasing(self) -> bool:
        v = self.column("l1_reference")
        return all(b <= a for a, b in zip(v, v[1:]))

    def l1_strictly_decreasing(self) -> bool:
        v = self.column("l1_reference")
        return all(b < a for a, b in zip(v, v[1:]))


def config_hash(schedule: ScalingSchedule, settings: SweepSettings) -> str:
    blob = json.dumps({"schedule": schedule.to_dict(), "settings": settings.to_dict()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _reference_state(settings: SweepSettings, base: FluxModel, grid: Grid) -> FVState:
    profile = initial_profile(settings.u0, grid)
    u0 = cell_averages(profile, settings.L, settings.reference_cells)
    return godunov_solve(u0, base, settings.T, L=settings.L, cfl=settings.cfl).final


def overshoot_metric(u, S_L: float, window: tuple[float, float] | None = None) -> float:
    """``max(0, max u − S_L)``, optionally restricted to a spatial window."""
    if isinstance(u, FVState):
        x, v = u.centers, np.asarray(u.values)
    elif isinstance(u, RealField):
        x, v = u.grid.coords()[0], u.values
    else:
        v = np.asarray(u, dtype=float)
        x = None
    if window is not None and x is not None:
        v = v[(x >= window[0]) & (x <= window[1])]
    return max(0.0, float(np.max(v)) - S_L)


def _run_one(args) -> tuple[dict, Trajectory | None]:
    eps, schedule, settings, reference, keep, out_dir = args
    grid = Grid(settings.dim, settings.L, settings.N)
    base = flux_from_spec(settings.flux)
    delta, n = schedule.delta(eps), schedule.n(eps)
    flux = mollify(base, n, eps, settings.L)
    u0 = mollify_field(_sample(initial_profile(settings.u0, grid), grid), n)
    cfg = SolverConfig(eps, delta, slab_dt=settings.slab_dt, picard_tol=settings.picard_tol)
    traj = solve(u0, settings.T, cfg, flux)
    traj.meta["u0"] = settings.u0
    rec = {"eps": eps, "delta": delta, "n": n}
    window = settings.window
    rec["l1_reference"] = l1_distance(traj.final, reference, window) if reference is not None else float("nan")
    if settings.overshoot_S_L is not None:
        rec["overshoot"] = overshoot_metric(traj.final, settings.overshoot_S_L, window or (-0.8 * settings.L, 0.8 * settings.L))
    else:
        rec["overshoot"] = float("nan")
    if settings.audit:
        report = verify_estimates(traj)
        rec["audit_pass"] = int(report.passed)
        rec["identity_residual_max"] = float(np.max(energy_identity_residual(traj)))
    else:
        rec["audit_pass"] = -1
        rec["identity_residual_max"] = float("nan")
    if settings.kinetic:
        lo, hi = base.lambda_window
        rec.update({k: v for k, v in decay_row(traj, LambdaGrid(lo, hi, settings.lambda_points)).items() if k not in rec})
    else:
        for k in ("gamma1_proxy", "gamma2_proxy", "gamma3_l1", "gamma4_l1", "gamma1_theory", "gamma2_theory", "gamma4_theory"):
            rec[k] = float("nan")
    stats = traj.picard_stats()
    rec["picard_iterations"] = stats["iterations_total"]
    rec["subslabs"] = stats["subslabs"]
    rec = {k: rec[k] for k in SWEEP_COLUMNS}
    if out_dir is not None:
        part = Path(out_dir) / "partial"
        part.mkdir(parents=True, exist_ok=True)
        write_json(part / f"eps_{eps!r}.json", rec)
    return rec, (traj if keep else None)


def run_sweep(
    schedule: ScalingSchedule,
    settings: SweepSettings,
    workers: int = 1,
    out_dir=None,
    keep_trajectories: bool = False,
    require_valid: bool = True,
) -> SweepResult:
    """Solve, audit, probe and compare for every ε of the schedule.

    Per-ε records are written to ``out_dir/partial`` as they complete, so a
    failing ε leaves the finished ones on disk.  Records are reduced in
    schedule order regardless of completion order.
    """
    verdict = validate_schedule(schedule)
    if require_valid and not verdict.valid:
        raise ScheduleRejected("schedule rejected: " + "; ".join(verdict.violations))
    started = time.strftime("%Y-%m-%dT%H:%M:%S")
    base = flux_from_spec(settings.flux)
    if verdict.regime == "ii":
        lo, hi = base.lambda_window
        lam = np.linspace(lo, hi, 2001)
        sup = float(np.max(np.abs(base.dlambda(np.zeros_like(lam), lam))))
        if not np.isfinite(sup):
            raise ScheduleRejected("regime ii needs a bounded λ-derivative of the flux")
    grid = Grid(settings.dim, settings.L, settings.N)
    reference = _reference_state(settings, base, grid) if (settings.reference and settings.dim == 1) else None
    jobs = [(eps, schedule, settings, reference, keep_trajectories, out_dir) for eps in schedule.epsilon_list]
    results: dict[float, tuple] = {}
    failure = None
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_one, job): job[0] for job in jobs}
            for fut, eps in futures.items():
                try:
                    results[eps] = fut.result()
                except Exception as exc:  # keep collecting, then re-raise
                    failure = failure or exc
    else:
        for job in jobs:
            try:
                results[job[0]] = _run_one(job)
            except Exception as exc:
                failure = exc
                break
    if failure is not None:
        raise failure
    ordered = [results[eps] for eps in schedule.epsilon_list]
    records = [r for r, _ in ordered]
    decay = summarize_decay(records) if settings.kinetic and records else None
    provenance = {
        "config_hash": config_hash(schedule, settings),
        "seeds": [],
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "schema_version": SCHEMA_VERSION,
    }
    return SweepResult(
        schedule, settings, records, provenance, verdict, decay, [t for _, t in ordered if t is not None]
    )


# overshoot scan ---------------------------------------------------------------------


SCAN_COLUMNS = ("family", "tau", "S_L", "eps", "delta", "n", "overshoot")


@dataclass
class OvershootScan:
    rows: list[dict]

    def capillary_max(self) -> tuple[float, dict | None]:
        rows = [r for r in self.rows if r["family"] == "capillary"]
        if not rows:
            return 0.0, None
        best = max(rows, key=lambda r: r["overshoot"])
        return best["overshoot"], best

    def control_at(self, S_L: float) -> list[dict]:
        return sorted(
            (r for r in self.rows if r["family"] == "control" and r["S_L"] == S_L), key=lambda r: -r["eps"]
        )


def _overshoot_run(args) -> dict:
    family, tau, S_L, eps, delta, n, base_spec, N, L, T, x0, slab_dt = args
    grid = Grid(1, L, N)
    base = flux_from_spec(base_spec)
    flux = mollify(base, n, eps, L)
    spec = {"kind": "riemann", "S_L": S_L, "S_R": 0.0, "x0": x0}
    u0 = mollify_field(_sample(initial_profile(spec, grid), grid), n)
    traj = solve(u0, T, SolverConfig(eps, delta, slab_dt=slab_dt), flux)
    value = overshoot_metric(traj.final, S_L, (x0 - 0.25 * L, 0.8 * L))
    return {"family": family, "tau": tau, "S_L": S_L, "eps": eps, "delta": delta, "n": n, "overshoot": value}


def overshoot_scan(
    taus: Sequence[float] = (1.0, 2.0, 5.0, 10.0),
    S_Ls: Sequence[float] = (0.6, 0.75, 0.9),
    eps: float = 0.02,
    control_eps: Sequence[float] = (0.04, 0.02, 0.01),
    n: float = 1e-3,
    flux: dict | None = None,
    N: int = 1024,
    L: float = 2.0,
    T: float = 0.5,
    x0: float = -1.0,
    slab_dt: float = 1e-2,
    workers: int = 1,
) -> OvershootScan:
    """Overshoot of Riemann runs with ``δ = τε²`` next to ``δ = ε³`` controls."""
    flux = flux or {"kind": "buckley_leverett", "A": 1.0}
    jobs = []
    for tau in taus:
        for S_L in S_Ls:
            jobs.append(("capillary", tau, S_L, eps, tau * eps**2, n, flux, N, L, T, x0, slab_dt))
    for S_L in S_Ls:
        for e in control_eps:
            jobs.append(("control", float("nan"), S_L, e, e**3, n, flux, N, L, T, x0, slab_dt))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_overshoot_run, jobs))
    else:
        rows = [_overshoot_run(j) for j in jobs]
    return OvershootScan(rows)


# reports ----------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def emit_report(result: SweepResult | None, out_dir, snapshots: bool = False) -> dict[str, Path]:
    """Write ``sweep.csv`` (one row per ε), ``decay.csv`` and ``manifest.json``.

    The CSV files contain only computed numbers; timestamps live in the
    manifest, so identical configs give byte-identical CSVs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"sweep": out / "sweep.csv", "manifest": out / "manifest.json"}
    records = result.records if result is not None else []
    write_csv(paths["sweep"], SWEEP_COLUMNS, records)
    if result is None:
        write_json(paths["manifest"], {"schema_version": SCHEMA_VERSION, "columns": list(SWEEP_COLUMNS), "records": 0})
        return paths
    if result.decay is not None:
        from .kinetic import DECAY_COLUMNS

        paths["decay"] = out / "decay.csv"
        write_csv(paths["decay"], DECAY_COLUMNS, result.decay.rows)
    if snapshots:
        for traj in result.trajectories:
            write_snapshot(out / f"final_eps_{traj.config.eps!r}.txt", traj.final, traj.T)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "columns": list(SWEEP_COLUMNS),
        "records": len(records),
        "schedule": result.schedule.to_dict(),
        "settings": result.settings.to_dict(),
        "verdict": {
            "valid": result.verdict.valid,
            "regime": result.verdict.regime,
            "satisfied": list(result.verdict.satisfied),
            "violations": list(result.verdict.violations),
            "runtime_requirements": list(result.verdict.runtime_requirements),
        }
        if result.verdict is not None
        else None,
        "provenance": result.provenance,
    }
    if result.decay is not None:
        manifest["decay"] = {
            "gamma1_decreasing": result.decay.gamma1_decreasing,
            "gamma2_decreasing": result.decay.gamma2_decreasing,
            "gamma3_ratio": result.decay.gamma3_ratio,
            "gamma4_ratio": result.decay.gamma4_ratio,
        }
    write_json(paths["manifest"], manifest)
    return paths


def load_snapshot_field(path) -> RealField:
    return read_snapshot(path)[0]
