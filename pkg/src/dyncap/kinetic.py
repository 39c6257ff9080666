r"""Kinetic function, velocity averages and the defect fields Γ₁–Γ₄.

For a trajectory ``u`` the kinetic function is ``h(t,x,λ) = sgn(u(t,x) − λ)``
with ``sgn(0) = +1``.  Because ``h`` is a step in λ for every ``(t, x)`` it is
never necessary to materialise the full ``(t, x, λ)`` array: velocity
averages reduce to ``searchsorted`` against cumulative λ-weights.  The cube
is still available slice by slice for direct inspection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GridMismatch, InconsistentRuns, MissingTimeDerivative, RangeEscape, SupportEscape
from .grid import Grid, RealField
from .solver import Trajectory

log = logging.getLogger(__name__)

__all__ = [
    "LambdaGrid",
    "lambda_grid_for",
    "KineticCube",
    "kinetic_function",
    "truncation",
    "lattice_truncation",
    "entropy_reconstruction",
    "velocity_average",
    "DefectBundle",
    "defect_bundle",
    "theory_bounds",
    "DecayTable",
    "defect_decay_study",
    "decay_row",
    "summarize_decay",
    "translation_modulus",
    "CompactnessReport",
    "compactness_probe",
]


@dataclass(frozen=True)
class LambdaGrid:
    lo: float
    hi: float
    count: int = 256

    def __post_init__(self):
        if self.count < 64:
            raise ValueError(f"λ-grid needs at least 64 points, got {self.count}")
        if not self.hi > self.lo:
            raise ValueError("λ-grid needs hi > lo")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.count - 1)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.count, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w


def _value_range(traj: Trajectory) -> tuple[float, float]:
    lo = min(float(np.min(s.values)) for s in traj.states)
    hi = max(float(np.max(s.values)) for s in traj.states)
    if traj.node_u is not None and len(traj.node_u):
        lo = min(lo, float(traj.node_u.min()))
        hi = max(hi, float(traj.node_u.max()))
    return lo, hi


def lambda_grid_for(trajs: Trajectory | Sequence[Trajectory], count: int = 256, margin: float = 0.1) -> LambdaGrid:
    """A λ-grid covering the value range of one or several runs with a margin."""
    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    ranges = [_value_range(t) for t in trajs]
    lo = min(r[0] for r in ranges)
    hi = max(r[1] for r in ranges)
    pad = margin * max(hi - lo, 1.0)
    # a little extra so the margin survives rounding
    return LambdaGrid(lo - 1.01 * pad, hi + 1.01 * pad, count)


def _h(u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    return np.where(u[..., None] >= lam, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class KineticCube:
    """``h`` on the lattice of recorded times × grid nodes × λ-grid, built lazily."""

    traj: Trajectory
    lam: LambdaGrid

    @property
    def shape(self) -> tuple[int, ...]:
        return (len(self.traj.times),) + self.traj.grid.shape + (self.lam.count,)

    def slice(self, k: int) -> np.ndarray:
        return _h(self.traj.states[k].values, self.lam.values)

    def values(self) -> np.ndarray:
        return np.stack([self.slice(k) for k in range(len(self.traj.times))])

    def crossing_index(self, k: int) -> np.ndarray:
        """Number of λ-nodes with ``λ ≤ u``, i.e. with ``h = +1``."""
        return np.searchsorted(self.lam.values, self.traj.states[k].values, side="right")

    def is_monotone(self) -> bool:
        return all(np.all(np.diff(self.slice(k), axis=-1) <= 0) for k in range(len(self.traj.times)))


def kinetic_function(traj: Trajectory, lambda_grid: LambdaGrid) -> KineticCube:
    lo, hi = _value_range(traj)
    if lo < lambda_grid.lo or hi > lambda_grid.hi:
        raise RangeEscape(f"solution range [{lo:.4g}, {hi:.4g}] leaves the λ-grid [{lambda_grid.lo}, {lambda_grid.hi}]")
    return KineticCube(traj, lambda_grid)


def truncation(u, l: float):
    """``T_l(u)``: clamp to ``[-l, l]``."""
    if not l > 0:
        raise ValueError(f"truncation level must be positive, got {l}")
    if isinstance(u, RealField):
        return RealField(u.grid, np.clip(u.values, -l, l))
    return np.clip(u, -l, l)


def _average(cube: KineticCube, k: int, weights: np.ndarray) -> np.ndarray:
    # h = +1 on the first j nodes and -1 on the rest
    S = np.concatenate([[0.0], np.cumsum(weights)])
    j = cube.crossing_index(k)
    return 2.0 * S[j] - S[-1]


def lattice_truncation(cube: KineticCube, l: float, k: int = -1) -> RealField:
    """``(1/2)∫_{-l}^{l} h dλ`` by trapezoid on the λ-nodes inside ``[-l, l]``."""
    lam = cube.lam.values
    tol = 1e-9 * cube.lam.spacing
    inside = (lam >= -l - tol) & (lam <= l + tol)
    if inside.sum() < 2:
        raise ValueError(f"fewer than two λ-nodes inside [-{l}, {l}]")
    w = np.zeros(lam.size)
    idx = np.flatnonzero(inside)
    seg = np.diff(lam[idx])
    w[idx[:-1]] += 0.5 * seg
    w[idx[1:]] += 0.5 * seg
    k = k % len(cube.traj.times)
    return RealField(cube.traj.grid, 0.5 * _average(cube, k, w))


def entropy_reconstruction(cube: KineticCube, k: int = -1) -> tuple[RealField, RealField]:
    """``(1/2)∫ η'(λ) h dλ`` for ``η = λ²`` next to its closed form.

    On the window ``[lo, hi]`` the closed form is ``u² − (lo² + hi²)/2``.
    """
    lam = cube.lam
    k = k % len(cube.traj.times)
    avg = 0.5 * _average(cube, k, lam.trapezoid_weights() * 2.0 * lam.values)
    u = cube.traj.states[k].values
    exact = u**2 - 0.5 * (lam.lo**2 + lam.hi**2)
    g = cube.traj.grid
    return RealField(g, avg), RealField(g, exact)


def velocity_average(cube: KineticCube, rho: Callable | np.ndarray) -> list[RealField]:
    """``∫ ρ(λ) h(t,x,λ) dλ`` by trapezoid quadrature, one field per recorded time."""
    lam = cube.lam
    if callable(rho):
        outside = np.concatenate(
            [lam.lo - lam.spacing * np.arange(1, 9), lam.hi + lam.spacing * np.arange(1, 9)]
        )
        if np.any(np.asarray(rho(outside), dtype=float) != 0.0):
            raise SupportEscape("ρ does not vanish outside the λ-grid")
        vals = np.asarray(rho(lam.values), dtype=float)
    else:
        vals = np.asarray(rho, dtype=float)
        if vals.shape != (lam.count,):
            raise ValueError("ρ samples must match the λ-grid")
    w = lam.trapezoid_weights() * vals
    g = cube.traj.grid
    return [RealField(g, _average(cube, k, w)) for k in range(len(cube.traj.times))]


# defects ----------------------------------------------------------------------------


def _spectral_grad(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Spectral gradient of a stack ``(..., *grid.shape)``; returns ``(dim, ...)``."""
    axes = tuple(range(-grid.dim, 0))
    U = np.fft.rfftn(u, axes=axes)
    out = []
    for i, xi in enumerate(grid.rwavenumbers()):
        xi = xi.copy()
        xi[np.isclose(np.abs(xi), np.pi / grid.L * grid.N / 2)] = 0.0
        out.append(np.fft.irfftn(1j * xi * U, s=grid.shape, axes=axes))
    return np.stack(out)


@dataclass
class DefectBundle:
    r"""Γ₁ = 2εh∇u, Γ₂ = 2δh∇∂t u, Γ₃ = 2εh|∇u|², Γ₄ = 2δh∇u·∇∂t u and G₃.

    Fields are produced per recorded time by :meth:`fields`; the scalar
    summaries are space-time quantities over ``[0,T] × box × Λ``.
    """

    cube: KineticCube
    eps: float
    delta: float
    gamma1_proxy: float
    gamma2_proxy: float
    gamma3_l1: float
    gamma4_l1: float
    gamma4_bound: float
    g3_l1: float
    grad_l2: float
    dtgrad_l2: float

    def fields(self, k: int) -> dict:
        traj = self.cube.traj
        g = traj.grid
        h = self.cube.slice(k).astype(float)
        gu = _spectral_grad(g, traj.states[k].values)
        gut = _spectral_grad(g, traj.dt_states[k].values)
        out = {
            "gamma1": 2 * self.eps * h[None] * gu[..., None],
            "gamma2": 2 * self.delta * h[None] * gut[..., None],
            "gamma3": 2 * self.eps * h * np.sum(gu**2, axis=0)[..., None],
            "gamma4": 2 * self.delta * h * np.sum(gu * gut, axis=0)[..., None],
        }
        out["grad_abs"] = np.sqrt(np.sum(gu**2, axis=0))
        out["dtgrad_abs"] = np.sqrt(np.sum(gut**2, axis=0))
        return out

    def pointwise_bounds_hold(self, rtol: float = 1e-12) -> bool:
        for k in range(len(self.cube.traj.times)):
            F = self.fields(k)
            gabs = F["grad_abs"][..., None]
            gtabs = F["dtgrad_abs"][..., None]
            g1 = np.sqrt(np.sum(F["gamma1"] ** 2, axis=0))
            ok = (
                np.all(g1 <= 2 * self.eps * gabs * (1 + rtol) + 1e-300)
                and np.all(np.abs(F["gamma3"]) <= 2 * self.eps * gabs**2 * (1 + rtol) + 1e-300)
                and np.all(np.abs(F["gamma4"]) <= 2 * self.delta * gabs * gtabs * (1 + rtol) + 1e-300)
            )
            if not ok:
                return False
        return True

    def summary(self) -> dict:
        return {
            "gamma1_proxy": self.gamma1_proxy,
            "gamma2_proxy": self.gamma2_proxy,
            "gamma3_l1": self.gamma3_l1,
            "gamma4_l1": self.gamma4_l1,
            "gamma4_bound": self.gamma4_bound,
            "g3_l1": self.g3_l1,
        }


def _g3_l1(traj: Trajectory, lam: LambdaGrid) -> float:
    """``‖h(∂λf − ∂λf_ε)‖_{L¹}`` = ``T ∫∫ |∂λf − ∂λf_ε| dx dλ`` (|h| = 1)."""
    g = traj.grid
    base = traj.flux.base
    x = g.coords()
    lv = lam.values
    w = lam.trapezoid_weights()
    total = 0.0
    for m, l in enumerate(lv):
        lfull = np.full(g.shape, l)
        xs = x if g.dim > 1 else x[0]
        diff = base.dlambda(xs, lfull) - traj.flux.dlambda(xs, lfull)
        total += w[m] * float(np.sum(np.sqrt(np.sum(diff**2, axis=0)))) * g.cell_volume
    return traj.T * total


def defect_bundle(traj: Trajectory, lambda_grid: LambdaGrid | None = None) -> DefectBundle:
    if not traj.has_time_derivative():
        raise MissingTimeDerivative("defects need ∂t u")
    lam = lambda_grid or lambda_grid_for(traj)
    cube = kinetic_function(traj, lam)
    g = traj.grid
    eps, delta = traj.config.eps, traj.config.delta
    if len(traj.node_t):
        gu = _spectral_grad(g, traj.node_u)
        gut = _spectral_grad(g, traj.node_ut)
        sum_axes = tuple(range(1, g.dim + 1))
        dens_grad = np.sum(gu**2, axis=0).sum(axis=sum_axes) * g.cell_volume
        dens_dt = np.sum(gut**2, axis=0).sum(axis=sum_axes) * g.cell_volume
        dens_cross = np.abs(np.sum(gu * gut, axis=0)).sum(axis=sum_axes) * g.cell_volume
        grad_sq = float(np.sum(traj.node_w * dens_grad))
        dt_sq = float(np.sum(traj.node_w * dens_dt))
        cross = float(np.sum(traj.node_w * dens_cross))
    else:
        grad_sq = dt_sq = cross = 0.0
    grad_l2, dt_l2 = math.sqrt(grad_sq), math.sqrt(dt_sq)
    return DefectBundle(
        cube=cube,
        eps=eps,
        delta=delta,
        gamma1_proxy=2 * eps * grad_l2,
        gamma2_proxy=2 * delta * dt_l2,
        gamma3_l1=2 * eps * lam.length * grad_sq,
        gamma4_l1=2 * delta * lam.length * cross,
        gamma4_bound=2 * delta * lam.length * grad_l2 * dt_l2,
        g3_l1=_g3_l1(traj, lam),
        grad_l2=grad_l2,
        dtgrad_l2=dt_l2,
    )


def theory_bounds(eps: float, delta: float, n: float, d: int) -> dict:
    """Closed-form rates with the generic constants set to one."""
    se, sd = math.sqrt(eps), math.sqrt(delta)
    bracket = (
        1 / (se * n ** (d + 1))
        + (sd / (se * n ** (d + 1)) + se) / n
        + 1 / (se * n ** (d + 1))
        + 1 / n ** (d / 2 + 1)
    )
    return {
        "gamma1_theory": se * (sd / n + 1),
        "gamma2_theory": sd * bracket,
        "gamma4_theory": sd * (1 / se + sd / (se * n)) * bracket,
    }


DECAY_COLUMNS = (
    "eps",
    "delta",
    "n",
    "gamma1_proxy",
    "gamma2_proxy",
    "gamma3_l1",
    "gamma4_l1",
    "gamma1_theory",
    "gamma2_theory",
    "gamma4_theory",
)


@dataclass
class DecayTable:
    rows: list[dict]
    gamma1_decreasing: bool
    gamma2_decreasing: bool
    gamma3_ratio: float
    gamma4_ratio: float
    notes: list = field(default_factory=list)

    def bounded(self, limit: float = 10.0) -> bool:
        return self.gamma3_ratio < limit and self.gamma4_ratio < limit


def _strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def _ratio(values) -> float:
    v = [x for x in values]
    if not v or max(v) == 0.0:
        return 1.0
    if min(v) == 0.0:
        return math.inf
    return max(v) / min(v)


def defect_decay_study(schedule, runs: Sequence[Trajectory], lambda_grid: LambdaGrid | None = None) -> DecayTable:
    """Tabulate defect norms along a schedule (runs ordered by decreasing ε).

    All runs share one λ-grid so the ``|Λ|`` factor in the L¹ norms does not
    drift between rows.
    """
    runs = list(runs)
    if not runs:
        raise InconsistentRuns("no runs given")
    g0, T0 = runs[0].grid, runs[0].T
    spec0 = runs[0].flux.base.spec
    for r in runs[1:]:
        if r.grid != g0 or abs(r.T - T0) > 1e-12 or r.flux.base.spec != spec0:
            raise InconsistentRuns("runs must share grid, horizon and base flux")
        if r.meta.get("u0") != runs[0].meta.get("u0"):
            raise InconsistentRuns("runs must share initial data")
    eps_list = [r.config.eps for r in runs]
    if not _strictly_decreasing(eps_list):
        raise InconsistentRuns("runs must be ordered by strictly decreasing ε")
    if schedule is not None:
        for r in runs:
            delta, n = schedule.delta(r.config.eps), schedule.n(r.config.eps)
            if not (math.isclose(delta, r.config.delta, rel_tol=1e-9, abs_tol=1e-300) and math.isclose(n, r.flux.n, rel_tol=1e-9)):
                raise InconsistentRuns(f"run at ε={r.config.eps} does not follow the schedule")
    lam = lambda_grid or lambda_grid_for(runs)
    return summarize_decay([decay_row(r, lam) for r in runs])


def decay_row(traj: Trajectory, lam: LambdaGrid) -> dict:
    """One row of the decay table: measured defect norms and theory columns."""
    b = defect_bundle(traj, lam)
    row = {
        "eps": traj.config.eps,
        "delta": traj.config.delta,
        "n": traj.flux.n,
        "gamma1_proxy": b.gamma1_proxy,
        "gamma2_proxy": b.gamma2_proxy,
        "gamma3_l1": b.gamma3_l1,
        "gamma4_l1": b.gamma4_l1,
    }
    row.update(theory_bounds(traj.config.eps, traj.config.delta, traj.flux.n, traj.grid.dim))
    return row


def summarize_decay(rows: Sequence[dict]) -> DecayTable:
    rows = list(rows)
    g1 = [r["gamma1_proxy"] for r in rows]
    g2 = [r["gamma2_proxy"] for r in rows]
    notes = []
    all_zero_g2 = all(v == 0.0 for v in g2)
    if all_zero_g2:
        notes.append("δ = 0: Γ₂ and Γ₄ vanish identically")
    return DecayTable(
        rows=rows,
        gamma1_decreasing=_strictly_decreasing(g1),
        gamma2_decreasing=all_zero_g2 or _strictly_decreasing(g2),
        gamma3_ratio=_ratio([r["gamma3_l1"] for r in rows]),
        gamma4_ratio=1.0 if all_zero_g2 else _ratio([r["gamma4_l1"] for r in rows]),
        notes=notes,
    )


# compactness ------------------------------------------------------------------------


def _window_mask(grid: Grid, window) -> np.ndarray:
    if window is None:
        window = (-0.8 * grid.L, 0.8 * grid.L)
    lo, hi = window
    mask = np.ones(grid.shape, dtype=bool)
    for x in grid.coords():
        mask &= (x >= lo) & (x <= hi)
    return mask


def translation_modulus(a: RealField, max_shift: int = 1, window=None) -> float:
    """``max_{0<|τ|≤max_shift·h} ‖a(·+τ) − a‖_{L¹(window)}`` over grid shifts."""
    g = a.grid
    mask = _window_mask(g, window)
    best = 0.0
    for s in range(1, max_shift + 1):
        for ax in range(g.dim):
            for sign in (1, -1):
                diff = np.abs(np.roll(a.values, sign * s, axis=ax) - a.values)
                best = max(best, float(np.sum(diff[mask]) * g.cell_volume))
    return best


@dataclass
class CompactnessReport:
    distances: list[float]
    moduli: list[list[float]]
    cauchy: bool


def compactness_probe(averages: Sequence, window=None, shifts: Sequence[int] = (1, 2, 4, 8)) -> CompactnessReport:
    """Consecutive L¹ distances between velocity averages of successive runs.

    ``averages`` holds one field per run (or one time-indexed list per run,
    in which case the final time is used).  ``moduli[r][s]`` is the L¹
    translation modulus of run ``r`` at shift ``shifts[s]`` cells.
    """
    fields = [a[-1] if isinstance(a, (list, tuple)) else a for a in averages]
    if len(fields) < 2:
        raise ValueError("need at least two runs")
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatch("velocity averages live on different grids")
    mask = _window_mask(g, window)
    dist = [
        float(np.sum(np.abs(b.values - a.values)[mask]) * g.cell_volume) for a, b in zip(fields, fields[1:])
    ]
    moduli = [[translation_modulus(f, s, window) for s in shifts] for f in fields]
    return CompactnessReport(dist, moduli, _strictly_decreasing(dist) if len(dist) > 1 else True)
