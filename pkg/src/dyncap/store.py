"""Trajectory directories: snapshot dumps, a binary node archive and a manifest.

Layout of a trajectory directory::

    manifest.json        config echo, flux spec, Picard statistics, checks
    arrays.npz           every recorded state, ∂t u and the Gauss-node data
    snap_00000.txt ...   one text snapshot per recorded time

The text snapshots are for humans and diff tools; :func:`load_trajectory`
reads the archive so a reloaded trajectory is bit-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .flux import flux_from_spec, mollify
from .grid import Grid, RealField, write_snapshot
from .solver import SlabRecord, SolverConfig, Trajectory

__all__ = ["save_trajectory", "load_trajectory", "write_json", "MANIFEST"]

MANIFEST = "manifest.json"


def write_json(path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_trajectory(traj: Trajectory, out_dir, snapshots: bool = True, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = traj.grid
    np.savez(
        out / "arrays.npz",
        times=traj.times,
        states=np.array([s.values for s in traj.states]),
        dt_states=np.array([s.values for s in traj.dt_states]) if traj.dt_states else np.zeros(0),
        node_t=traj.node_t,
        node_w=traj.node_w,
        node_u=traj.node_u if traj.node_u is not None else np.zeros(0),
        node_ut=traj.node_ut if traj.node_ut is not None else np.zeros(0),
    )
    if snapshots:
        for k, (t, s) in enumerate(zip(traj.times, traj.states)):
            write_snapshot(out / f"snap_{k:05d}.txt", s, float(t))
    cfg = traj.config
    manifest = {
        "grid": {"dim": g.dim, "L": g.L, "N": g.N},
        "config": {
            "eps": cfg.eps,
            "delta": cfg.delta,
            "slab_dt": cfg.slab_dt,
            "picard_tol": cfg.picard_tol,
            "picard_max_iter": cfg.picard_max_iter,
            "quadrature_substeps": cfg.quadrature_substeps,
        },
        "flux": traj.flux.base.spec,
        "n_moll": traj.flux.n,
        "T": traj.T,
        "picard": traj.picard_stats(),
        "diagnostics": [
            [r.t_start, r.dt, r.iterations, r.residual, r.bisections] for r in traj.diagnostics
        ],
        "meta": traj.meta,
    }
    if extra:
        manifest.update(extra)
    write_json(out / MANIFEST, manifest)
    return out


def load_trajectory(path) -> Trajectory:
    path = Path(path)
    try:
        with open(path / MANIFEST) as fh:
            manifest = json.load(fh)
        arrays = np.load(path / "arrays.npz")
    except FileNotFoundError as exc:
        raise OSError(f"{path}: not a trajectory directory ({exc.filename} missing)") from exc
    g = Grid(**manifest["grid"])
    cfg = SolverConfig(**manifest["config"])
    base = flux_from_spec(manifest["flux"], base_dir=path)
    flux = mollify(base, manifest["n_moll"], cfg.eps, g.L)
    states = [RealField(g, v) for v in arrays["states"]]
    dts = [RealField(g, v) for v in arrays["dt_states"]] if arrays["dt_states"].size else None
    diags = [SlabRecord(t, dt, int(it), res, int(b), float("nan")) for t, dt, it, res, b in manifest["diagnostics"]]
    node_u = arrays["node_u"].reshape((-1,) + g.shape) if arrays["node_u"].size else None
    node_ut = arrays["node_ut"].reshape((-1,) + g.shape) if arrays["node_ut"].size else None
    return Trajectory(
        grid=g,
        times=arrays["times"],
        states=states,
        dt_states=dts,
        flux=flux,
        config=cfg,
        diagnostics=diags,
        node_t=arrays["node_t"],
        node_w=arrays["node_w"],
        node_u=node_u,
        node_ut=node_ut,
        meta=manifest.get("meta", {}),
    )
