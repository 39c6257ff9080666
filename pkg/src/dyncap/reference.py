"""Entropy solutions of ``∂t u + ∂x f(x,u) = 0`` in one space dimension.

Two independent references:

* :func:`godunov_solve`, a first-order monotone finite-volume scheme on the
  same periodic box as the spectral runs;
* :func:`bl_riemann_exact`, the Oleinik-admissible Riemann solution for the
  Buckley–Leverett flux (concave hull construction).

:func:`l1_distance` compares any two piecewise-constant representations
(spectral nodes or finite-volume cells) exactly, by overlaying breakpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import BoxMismatch, CFLViolation, EqualStates, NoTangency
from .flux import FluxModel, SeparableFlux, bl_dflux, bl_flux
from .grid import Grid, RealField

__all__ = [
    "FVState",
    "FVTrajectory",
    "cell_centers",
    "cell_averages",
    "godunov_solve",
    "rankine_hugoniot_speed",
    "Wave",
    "RiemannSolution",
    "bl_riemann_exact",
    "l1_distance",
    "write_fv_snapshot",
]

MAX_CFL = 0.45


@dataclass(frozen=True)
class FVState:
    """Cell averages on ``M`` equal cells of ``[-L, L)``."""

    L: float
    values: np.ndarray = field(repr=False)
    t: float = 0.0
    cfl: float = MAX_CFL

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return 2 * self.L / self.M

    @property
    def edges(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.M + 1)

    @property
    def centers(self) -> np.ndarray:
        return cell_centers(self.L, self.M)

    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(np.append(self.values, self.values[0])))))


@dataclass
class FVTrajectory:
    states: list[FVState]
    steps: int

    @property
    def final(self) -> FVState:
        return self.states[-1]


def cell_centers(L: float, M: int) -> np.ndarray:
    h = 2 * L / M
    return -L + h * (np.arange(M) + 0.5)


def cell_averages(func: Callable, L: float, M: int, points: int = 8) -> np.ndarray:
    """Gauss–Legendre cell averages of ``func`` on ``M`` cells."""
    h = 2 * L / M
    q, w = np.polynomial.legendre.leggauss(points)
    left = -L + h * np.arange(M)
    x = left[:, None] + 0.5 * h * (q[None, :] + 1.0)
    return np.asarray(func(x), dtype=float) @ (0.5 * w)


# Godunov --------------------------------------------------------------------------


class _ScalarFlux:
    """Homogeneous part ``g`` of a 1D flux plus its coefficient on cells."""

    def __init__(self, flux: FluxModel, centers: np.ndarray):
        if flux.dim != 1:
            raise ValueError("the reference solver is one-dimensional")
        self.flux = flux
        if isinstance(flux, SeparableFlux):
            self.k = flux.coefficient(centers)
            prof = flux.profiles[0]
            self.g = prof
            self.dg = prof.d
        else:
            raise ValueError("godunov_solve needs a separable flux")
        lo, hi = flux.lambda_window
        lam = np.linspace(lo, hi, 4001)
        d = self.dg(lam)
        self.sup_dg = float(np.max(np.abs(d)))
        gv = self.g(lam)
        self.g_max, self.g_min = float(np.max(gv)), float(np.min(gv))
        self.increasing = bool(np.all(d >= 0))
        self.decreasing = bool(np.all(d <= 0))
        # interior extrema of g, for the min/max Godunov formula
        s = np.sign(d)
        change = np.flatnonzero(s[:-1] * s[1:] < 0)
        self.critical = np.array(
            [optimize.brentq(self.dg, lam[i], lam[i + 1]) for i in change if self.dg(lam[i]) * self.dg(lam[i + 1]) < 0]
        )

    def interface(self, uL: np.ndarray, uR: np.ndarray) -> np.ndarray:
        kL = self.k
        kR = np.roll(self.k, -1)
        homogeneous = np.all(kL == kR)
        # demand/supply form: at a coefficient jump the upwind side may push
        # more than the downwind side can carry, and the interface saturates
        if self.increasing:
            return np.minimum(kL * self.g(uL), kR * self.g_max)
        if self.decreasing:
            return np.maximum(kR * self.g(uR), kL * self.g_min)
        if not homogeneous:
            raise ValueError("discontinuous coefficients need a monotone λ-profile")
        gL, gR = self.g(uL), self.g(uR)
        lo = np.minimum(uL, uR)
        hi = np.maximum(uL, uR)
        fmin = np.minimum(gL, gR)
        fmax = np.maximum(gL, gR)
        for c in self.critical:
            inside = (lo < c) & (c < hi)
            gc = float(self.g(np.array(c)))
            fmin = np.where(inside, np.minimum(fmin, gc), fmin)
            fmax = np.where(inside, np.maximum(fmax, gc), fmax)
        return kL * np.where(uL <= uR, fmin, fmax)


def godunov_solve(
    u0,
    flux: FluxModel,
    T_final: float,
    L: float | None = None,
    cfl: float = MAX_CFL,
    record_times: Sequence[float] | None = None,
) -> FVTrajectory:
    """First-order Godunov scheme with periodic boundaries.

    ``u0`` is an :class:`FVState` or an array of cell averages (then ``L`` is
    required).  States are recorded at ``record_times`` (default ``[0, T]``).
    """
    if not 0 < cfl <= MAX_CFL:
        raise CFLViolation(f"CFL number must lie in (0, {MAX_CFL}], got {cfl}")
    if isinstance(u0, FVState):
        L = u0.L
        values = np.array(u0.values, dtype=float)
        t0 = u0.t
    else:
        if L is None:
            raise ValueError("L is required when u0 is an array")
        values = np.array(u0, dtype=float)
        t0 = 0.0
    M = values.size
    h = 2 * L / M
    sf = _ScalarFlux(flux, cell_centers(L, M))
    speed = float(np.max(np.abs(sf.k))) * sf.sup_dg
    record = sorted(set([t0] + list(record_times or []) + [t0 + T_final]))
    record = [t for t in record if t0 <= t <= t0 + T_final]
    states = [FVState(L, values.copy(), t0, cfl)]
    t = t0
    steps = 0
    for target in record[1:]:
        span = target - t
        if span <= 0:
            continue
        n = max(1, math.ceil(span * speed / (cfl * h))) if speed > 0 else 1
        dt = span / n
        for _ in range(n):
            F = sf.interface(values, np.roll(values, -1))
            values = values - dt / h * (F - np.roll(F, 1))
            steps += 1
        t = target
        states.append(FVState(L, values.copy(), t, cfl))
    return FVTrajectory(states, steps)


# Riemann problems -----------------------------------------------------------------------


def _scalar(flux: FluxModel) -> Callable:
    if flux.dim != 1:
        raise ValueError("need a one-dimensional flux")
    return lambda s: float(flux.eval(np.array(0.0), np.array(s, dtype=float))[0])


def rankine_hugoniot_speed(flux: FluxModel | Callable, S_L: float, S_R: float) -> float:
    if S_L == S_R:
        raise EqualStates("Rankine–Hugoniot speed needs distinct states")
    f = flux if callable(flux) and not isinstance(flux, FluxModel) else _scalar(flux)
    return (f(S_L) - f(S_R)) / (S_L - S_R)


@dataclass(frozen=True)
class Wave:
    kind: str  # "shock" or "rarefaction"
    left: float
    right: float
    speed_lo: float
    speed_hi: float

    @property
    def speed(self) -> float:
        return float(self.speed_lo)


@dataclass
class RiemannSolution:
    S_L: float
    S_R: float
    A: float
    waves: list[Wave]
    tangency: float | None = None
    _fan: tuple | None = field(default=None, repr=False)
    _mirrored: bool = False

    def f(self, s):
        return bl_flux(s, self.A)

    def df(self, s):
        return bl_dflux(s, self.A)

    def __call__(self, xi):
        """Self-similar profile ``u(x/t)``."""
        xi = np.asarray(xi, dtype=float)
        out = np.full(xi.shape, self.S_L)
        for w in self.waves:
            if w.kind == "shock":
                out = np.where(xi >= w.speed_lo, w.right, out)
            else:
                fx, fu = self._fan
                inside = (xi >= w.speed_lo) & (xi < w.speed_hi)
                out = np.where(inside, np.interp(xi, fx, fu), out)
                out = np.where(xi >= w.speed_hi, w.right, out)
        return out

    def sample(self, x, t: float):
        if t <= 0:
            return np.where(np.asarray(x) < 0, self.S_L, self.S_R)
        return self(np.asarray(x) / t)

    def tangency_residual(self) -> float:
        if self.tangency is None:
            return 0.0
        s, r = self.tangency, (self.S_R if not self._mirrored else 1 - self.S_R)
        A = self.A if not self._mirrored else 1 / self.A
        return abs(bl_dflux(s, A) - (bl_flux(s, A) - bl_flux(r, A)) / (s - r))

    def chord_condition(self, samples: int = 10, tol: float = 1e-12) -> bool:
        """Oleinik: ``(f(u)−f(u₋))/(u−u₋) ≥ s ≥ (f(u)−f(u₊))/(u−u₊)`` between the states."""
        for w in self.waves:
            if w.kind != "shock":
                continue
            a, b, s = w.left, w.right, w.speed
            u = a + (b - a) * (np.arange(1, samples + 1) / (samples + 1))
            left = (self.f(u) - self.f(a)) / (u - a)
            right = (self.f(u) - self.f(b)) / (u - b)
            if np.any(left < s - tol) or np.any(right > s + tol):
                return False
        return True

    def is_monotone(self, points: int = 4001) -> bool:
        lo = min([w.speed_lo for w in self.waves] + [0.0]) - 1
        hi = max([w.speed_hi for w in self.waves] + [0.0]) + 1
        v = self(np.linspace(lo, hi, points))
        d = np.diff(v)
        return bool(np.all(d <= 1e-14) or np.all(d >= -1e-14))


def _dipping(A: float, S_L: float, S_R: float) -> RiemannSolution:
    f = lambda s: bl_flux(s, A)
    df = lambda s: bl_dflux(s, A)

    def phi(s):
        return df(s) * (s - S_R) - (f(s) - f(S_R))

    grid = S_R + (1.0 - S_R) * np.linspace(0, 1, 4001)[1:]
    vals = np.array([phi(s) for s in grid])
    pos = np.flatnonzero(vals > 0)
    if pos.size == 0:
        if np.all(vals <= 0):
            # f concave on [S_R, 1]: the hull is f itself
            S_star = S_R
        else:
            raise NoTangency("no tangency point; flux is not S-shaped on this interval")
    else:
        i = pos[-1]
        if i + 1 >= grid.size:
            raise NoTangency("tangency bracket reaches the end of the interval")
        S_star = optimize.bisect(phi, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if S_L <= S_star:
        c = (f(S_L) - f(S_R)) / (S_L - S_R)
        return RiemannSolution(S_L, S_R, A, [Wave("shock", S_L, S_R, c, c)], tangency=S_star if S_star > S_R else None)
    lo_speed, hi_speed = df(S_L), df(S_star)
    # fan table: invert f' on the concave branch [S_star, S_L]
    xi = np.linspace(lo_speed, hi_speed, 1024)
    us = []
    for target in xi:
        if target <= lo_speed:
            us.append(S_L)
        elif target >= hi_speed:
            us.append(S_star)
        else:
            us.append(optimize.bisect(lambda s: df(s) - target, S_star, S_L, xtol=1e-15, maxiter=200))
    waves = [Wave("rarefaction", S_L, S_star, lo_speed, hi_speed)]
    if S_star > S_R:
        waves.append(Wave("shock", S_star, S_R, hi_speed, hi_speed))
    return RiemannSolution(
        S_L, S_R, A, waves, tangency=S_star if S_star > S_R else None, _fan=(xi, np.array(us))
    )


def bl_riemann_exact(A: float, S_L: float, S_R: float) -> RiemannSolution:
    """Oleinik-admissible Riemann solution for the Buckley–Leverett flux.

    The dipping case ``S_L > S_R`` is built from the concave hull; the rising
    case follows from the symmetry ``u ↦ 1 − u``, which maps the flux with
    parameter ``A`` to the one with ``1/A``.
    """
    if not A > 0:
        raise ValueError("A must be positive")
    if not (0 <= S_L <= 1 and 0 <= S_R <= 1):
        raise ValueError("states must lie in [0, 1]")
    if S_L == S_R:
        return RiemannSolution(S_L, S_R, A, [])
    if S_L > S_R:
        return _dipping(A, S_L, S_R)
    m = _dipping(1.0 / A, 1.0 - S_L, 1.0 - S_R)
    waves = [Wave(w.kind, 1.0 - w.left, 1.0 - w.right, w.speed_lo, w.speed_hi) for w in m.waves]
    fan = None if m._fan is None else (m._fan[0], 1.0 - m._fan[1])
    return RiemannSolution(S_L, S_R, A, waves, tangency=None if m.tangency is None else m.tangency, _fan=fan, _mirrored=True)


# L1 distance --------------------------------------------------------------------


def _pieces(a) -> tuple[float, np.ndarray, np.ndarray]:
    """``(L, edges, values)`` of the piecewise-constant representation."""
    if isinstance(a, FVState):
        return a.L, a.edges, np.asarray(a.values)
    if isinstance(a, RealField):
        g = a.grid
        if g.dim != 1:
            raise ValueError("piecewise overlay is one-dimensional")
        edges = np.append(g.x1d - 0.5 * g.h, g.x1d[-1] + 0.5 * g.h)
        return g.L, edges, np.asarray(a.values)
    raise TypeError(f"cannot compare objects of type {type(a).__name__}")


def l1_distance(a, b, window: tuple[float, float] | None = None) -> float:
    """``‖a − b‖_{L¹(window)}`` of two piecewise-constant profiles on one box.

    Spectral nodes stand for cells centred on the nodes; finite-volume cells
    are used as they are.  The default window is the central 80% of the box.
    """
    La, ea, va = _pieces(a)
    Lb, eb, vb = _pieces(b)
    if not math.isclose(La, Lb, rel_tol=1e-12):
        raise BoxMismatch(f"boxes differ: L = {La} vs {Lb}")
    lo, hi = window if window is not None else (-0.8 * La, 0.8 * La)
    br = np.unique(np.concatenate([ea, eb, [lo, hi]]))
    br = br[(br >= lo) & (br <= hi)]
    if br.size < 2:
        return 0.0
    mid = 0.5 * (br[:-1] + br[1:])
    ia = np.clip(np.searchsorted(ea, mid, side="right") - 1, 0, va.size - 1)
    ib = np.clip(np.searchsorted(eb, mid, side="right") - 1, 0, vb.size - 1)
    return float(np.sum(np.abs(va[ia] - vb[ib]) * np.diff(br)))


def write_fv_snapshot(path, state: FVState) -> None:
    """Dump an FV state in the spectral snapshot format (cell centres as ``x``)."""
    from .grid import _HEADER

    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        fh.write(f"# 1 {state.L:.17e} {state.M} {state.t:.17e}\n")
        np.savetxt(fh, np.column_stack([state.centers, state.values]), fmt="%.17e")
