r"""Flux models ``f(x, λ)`` and their mollification.

A :class:`FluxModel` is either *separable*, ``f_i(x, λ) = k(x) g_i(λ)`` with a
piecewise constant coefficient ``k`` that jumps across hyperplanes
``x_1 = const`` (homogeneous fluxes have no jumps), or a 1D *table* flux read
from samples.  Outside its λ-window a flux is frozen, so ``∂_λ f`` has compact
λ-support.

:func:`mollify` turns a model into a smooth :class:`MollifiedFlux`
``f_ε = K_ε · (f ⋆ ω_n)``.  The x-dependence is periodised on the simulation
box ``[-L, L)^d`` (every jump is paired with a compensating seam at ``x_1 = ±L``)
so the spectral solver sees a smooth periodic flux.  Inside the ball
``B(0, 1/ε)`` the cutoff ``K_ε`` is identically one; :func:`mollify` refuses
boxes that leave that ball.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, ndimage
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import (
    CutoffTooTight,
    EmptySampleSet,
    NonPositiveA,
    NonPositivePermeability,
    NonPositiveWidth,
)
from .grid import Grid, RealField

__all__ = [
    "bump",
    "bump_cdf",
    "Mollifier",
    "mollifier",
    "mollify_field",
    "LambdaProfile",
    "StepCoefficient",
    "JumpRecord",
    "FluxModel",
    "SeparableFlux",
    "TableFlux",
    "MollifiedFlux",
    "buckley_leverett",
    "bl_flux",
    "bl_dflux",
    "linear_flux",
    "zero_flux",
    "two_rock_flux",
    "table_flux",
    "mollify",
    "NondegeneracyReport",
    "check_nondegeneracy",
    "sphere_directions",
    "flux_from_spec",
    "load_flux_config",
]


# bump and its CDF -------------------------------------------------------------


def _psi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _bump_tables():
    s = np.linspace(-1.0, 1.0, 40001)
    spline = CubicSpline(s, _psi(s))
    anti = spline.antiderivative()
    Z = float(anti(1.0))
    return Z, anti


def _bump_mass() -> float:
    return _bump_tables()[0]


def bump(s):
    """Even C∞ bump ``exp(-1/(1-s²))`` on ``|s| < 1`` with unit integral."""
    return _psi(s) / _bump_mass()


def bump_cdf(s):
    """Primitive of :func:`bump`, zero left of -1 and one right of 1."""
    Z, anti = _bump_tables()
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    return anti(s) / Z


def _bump_prime(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = -2.0 * si / (1.0 - si**2) ** 2 * np.exp(-1.0 / (1.0 - si**2))
    return out / _bump_mass()


def _bump_second(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    q = 1.0 - si**2
    d1 = -2.0 * si / q**2
    d1p = -2.0 / q**2 - 8.0 * si**2 / q**3
    out[inside] = (d1**2 + d1p) * np.exp(-1.0 / q)
    return out / _bump_mass()


@dataclass(frozen=True)
class Mollifier:
    r"""``ω_n(x, λ) = n^{-d} ω^{(1)}(x/n) · n^{-1} ω^{(2)}(λ/n)``.

    Both factors are built from :func:`bump`; the spatial factor is the
    tensor product over the ``dim`` axes.
    """

    n: float
    dim: int = 1

    def __post_init__(self):
        if not self.n > 0:
            raise NonPositiveWidth(f"mollifier width must be positive, got {self.n}")

    @property
    def support_radius(self) -> float:
        return self.n

    def spatial(self, *x):
        out = 1.0
        for xi in x:
            out = out * bump(np.asarray(xi) / self.n) / self.n
        return out

    def lam(self, lam):
        return bump(np.asarray(lam) / self.n) / self.n

    def __call__(self, *args):
        *x, lam = args
        return self.spatial(*x) * self.lam(lam)

    def weights(self, spacing: float) -> np.ndarray:
        """1D kernel samples at offsets ``j·spacing``, renormalised to sum one."""
        m = int(np.floor(self.n / spacing))
        s = spacing * np.arange(-m, m + 1)
        w = self.lam(s)
        total = w.sum()
        if total == 0.0:
            return np.array([1.0])
        return w / total

    def derivative_l1(self) -> tuple[float, float]:
        """``n‖∇ω^{(1)}_n‖_{L¹}`` and ``n²‖D²ω^{(1)}_n‖_{L¹}`` (Frobenius over i, j).

        Both are n-independent; they bound the mollified data derivatives.
        """
        s = np.linspace(-1.0, 1.0, 20001)
        l1 = integrate.trapezoid(np.abs(_bump_prime(s)), s)
        l2 = integrate.trapezoid(np.abs(_bump_second(s)), s)
        # tensor product: ∂_i ω = ω'(x_i) Π_{j≠i} ω(x_j), whose L¹ norm is l1
        first = np.sqrt(self.dim) * l1
        second = np.sqrt(self.dim * l2**2 + self.dim * (self.dim - 1) * l1**4)
        return float(first), float(second)


def mollifier(n: float, dim: int = 1) -> Mollifier:
    return Mollifier(n, dim)


def mollify_field(f: RealField, n: float) -> RealField:
    """Periodic convolution ``f ⋆ ω^{(1)}_n`` on the grid, kernel renormalised."""
    if not n > 0:
        raise NonPositiveWidth(f"mollifier width must be positive, got {n}")
    g = f.grid
    offsets = g.h * np.fft.fftfreq(g.N, d=1.0 / g.N)
    k1 = bump(offsets / n)
    if k1.sum() == 0.0:
        return f
    k1 = k1 / k1.sum()
    kernel = 1.0
    for i in range(g.dim):
        shape = [1] * g.dim
        shape[i] = g.N
        kernel = kernel * k1.reshape(shape)
    axes = tuple(range(g.dim))
    out = np.fft.irfftn(np.fft.rfftn(f.values) * np.fft.rfftn(kernel), s=g.shape, axes=axes)
    return RealField(g, out)


# flux models ------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaProfile:
    """A λ-profile ``g`` frozen outside ``[lo, hi]``."""

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    deriv: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lo: float
    hi: float

    def __call__(self, lam):
        return self.func(np.clip(lam, self.lo, self.hi))

    def d(self, lam):
        lam = np.asarray(lam, dtype=float)
        inside = (lam > self.lo) & (lam < self.hi)
        return np.where(inside, self.deriv(np.clip(lam, self.lo, self.hi)), 0.0)


def bl_flux(S, A: float = 1.0):
    S = np.asarray(S, dtype=float)
    return S**2 / (S**2 + A * (1.0 - S) ** 2)


def bl_dflux(S, A: float = 1.0):
    S = np.asarray(S, dtype=float)
    D = S**2 + A * (1.0 - S) ** 2
    return 2.0 * A * S * (1.0 - S) / D**2


@dataclass(frozen=True)
class StepCoefficient:
    """``k(x) = base + Σ_m dk_m · 1[x_1 ≥ p_m]`` along the first axis."""

    base: float = 1.0
    jumps: tuple[tuple[float, float], ...] = ()

    def __call__(self, x1):
        x1 = np.asarray(x1, dtype=float)
        out = np.full(x1.shape, self.base)
        for p, dk in self.jumps:
            out = out + dk * (x1 >= p)
        return out

    @property
    def homogeneous(self) -> bool:
        return all(dk == 0.0 for _, dk in self.jumps)

    def periodic_mollified(self, x1, n: float, L: float):
        r"""Periodised ``k ⋆ ω_n`` on ``[-L, L)``.

        Each jump ``(p, dk)`` contributes the indicator of ``[p, L)``; summing
        its periodic images gives ``Φ((x-p)/n) - Φ((x-L)/n)`` per image.
        """
        x1 = np.asarray(x1, dtype=float)
        out = np.full(x1.shape, self.base)
        for p, dk in self.jumps:
            acc = np.zeros_like(x1)
            for r in (-2, -1, 0, 1, 2):
                acc += bump_cdf((x1 - p - 2 * L * r) / n) - bump_cdf((x1 - L - 2 * L * r) / n)
            out = out + dk * acc
        return out

    def periodic_mollified_derivative(self, x1, n: float, L: float):
        x1 = np.asarray(x1, dtype=float)
        out = np.zeros(x1.shape)
        for p, dk in self.jumps:
            for r in (-2, -1, 0, 1, 2):
                out += dk * (bump((x1 - p - 2 * L * r) / n) - bump((x1 - L - 2 * L * r) / n)) / n
        return out


@dataclass(frozen=True)
class JumpRecord:
    """``div_x f`` carries ``strength(λ) δ(x_axis - position)``."""

    axis: int
    position: float
    strength: Callable[[np.ndarray], np.ndarray] = field(repr=False)


class FluxModel:
    """Common interface: ``eval``, ``dlambda``, ``divx`` plus structural data."""

    dim: int
    lambda_window: tuple[float, float]
    mu_mass: float
    beta: float
    spec: dict

    def eval(self, x, lam) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def dlambda(self, x, lam) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def divx(self, x, lam) -> np.ndarray:
        """Absolutely continuous part of ``div_x f``; jumps live in :attr:`jumps`."""
        raise NotImplementedError  # pragma: no cover

    @property
    def jumps(self) -> tuple[JumpRecord, ...]:
        return ()

    @property
    def homogeneous(self) -> bool:
        return False


def _as_coords(x, dim):
    if dim == 1 and not isinstance(x, (tuple, list)):
        return (np.asarray(x, dtype=float),)
    if len(x) != dim:
        raise ValueError(f"expected {dim} coordinate arrays")
    return tuple(np.asarray(c, dtype=float) for c in x)


@dataclass(frozen=True, eq=False)
class SeparableFlux(FluxModel):
    dim: int
    profiles: tuple[LambdaProfile, ...]
    coefficient: StepCoefficient
    lambda_window: tuple[float, float]
    mu_mass: float = 0.0
    beta: float = 1.0
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.profiles) != self.dim:
            raise ValueError("need one λ-profile per space dimension")
        lo, hi = self.lambda_window
        for p in self.profiles:
            if p.lo < lo or p.hi > hi:
                raise ValueError(f"profile {p.name} varies outside the λ-window")

    def eval(self, x, lam):
        x = _as_coords(x, self.dim)
        k = self.coefficient(x[0])
        return np.stack([np.broadcast_to(k * p(lam), np.broadcast(k, lam).shape) for p in self.profiles])

    def dlambda(self, x, lam):
        x = _as_coords(x, self.dim)
        k = self.coefficient(x[0])
        return np.stack([np.broadcast_to(k * p.d(lam), np.broadcast(k, lam).shape) for p in self.profiles])

    def divx(self, x, lam):
        x = _as_coords(x, self.dim)
        return np.zeros(np.broadcast(x[0], lam).shape)

    @property
    def homogeneous(self) -> bool:
        return self.coefficient.homogeneous

    @property
    def jumps(self) -> tuple[JumpRecord, ...]:
        g0 = self.profiles[0]
        return tuple(
            JumpRecord(0, p, (lambda lam, dk=dk: dk * g0(lam))) for p, dk in self.coefficient.jumps if dk != 0.0
        )

    def sup_abs(self) -> float:
        lo, hi = self.lambda_window
        lam = np.linspace(lo, hi, 4001)
        return float(max(np.max(np.abs(p(lam))) for p in self.profiles))


@dataclass(frozen=True, eq=False)
class TableFlux(FluxModel):
    """1D flux sampled on a tensor grid ``(x_i, λ_j)``; frozen outside the table."""

    x: np.ndarray
    lam: np.ndarray
    values: np.ndarray
    lambda_window: tuple[float, float]
    mu_mass: float = 0.0
    beta: float = 1.0
    spec: dict = field(default_factory=dict)
    dim: int = 1

    @cached_property
    def _spline(self):
        kx = min(3, self.x.size - 1)
        ky = min(3, self.lam.size - 1)
        return RectBivariateSpline(self.x, self.lam, self.values, kx=kx, ky=ky)

    def _clip(self, x, lam):
        x = np.clip(_as_coords(x, 1)[0], self.x[0], self.x[-1])
        lam = np.clip(np.asarray(lam, dtype=float), self.lam[0], self.lam[-1])
        return np.broadcast_arrays(x, lam)

    def eval(self, x, lam):
        xx, ll = self._clip(x, lam)
        return self._spline.ev(xx, ll)[None]

    def dlambda(self, x, lam):
        lam_arr = np.asarray(lam, dtype=float)
        xx, ll = self._clip(x, lam)
        inside = (np.broadcast_to(lam_arr, ll.shape) > self.lam[0]) & (np.broadcast_to(lam_arr, ll.shape) < self.lam[-1])
        return np.where(inside, self._spline.ev(xx, ll, dy=1), 0.0)[None]

    def divx(self, x, lam):
        x_arr = _as_coords(x, 1)[0]
        xx, ll = self._clip(x, lam)
        inside = (np.broadcast_to(x_arr, xx.shape) > self.x[0]) & (np.broadcast_to(x_arr, xx.shape) < self.x[-1])
        return np.where(inside, self._spline.ev(xx, ll, dx=1), 0.0)


def buckley_leverett(A: float = 1.0, lambda_window=(-0.2, 1.2)) -> SeparableFlux:
    """Homogeneous 1D flux ``S²/(S² + A(1-S)²)`` on [0, 1], frozen outside."""
    if not A > 0:
        raise NonPositiveA(f"A must be positive, got {A}")
    prof = LambdaProfile(
        f"bl(A={A})",
        lambda S: bl_flux(S, A),
        lambda S: bl_dflux(S, A),
        0.0,
        1.0,
    )
    return SeparableFlux(
        1,
        (prof,),
        StepCoefficient(),
        tuple(lambda_window),
        spec={"kind": "buckley_leverett", "A": A, "lambda_window": list(lambda_window)},
    )


def linear_flux(c: float | Sequence[float] = 1.0, lambda_window=(-10.0, 10.0)) -> SeparableFlux:
    """``f_i(λ) = c_i λ`` on the window, frozen outside it."""
    cs = np.atleast_1d(np.asarray(c, dtype=float))
    lo, hi = lambda_window
    profs = tuple(
        LambdaProfile(f"linear(c={ci})", (lambda lam, ci=ci: ci * lam), (lambda lam, ci=ci: np.full(np.shape(lam), ci)), lo, hi)
        for ci in cs
    )
    return SeparableFlux(
        len(cs),
        profs,
        StepCoefficient(),
        (lo, hi),
        spec={"kind": "linear", "c": cs.tolist(), "lambda_window": [lo, hi]},
    )


def zero_flux(dim: int = 1, lambda_window=(-10.0, 10.0)) -> SeparableFlux:
    lo, hi = lambda_window
    prof = LambdaProfile("zero", lambda lam: np.zeros(np.shape(lam)), lambda lam: np.zeros(np.shape(lam)), lo, hi)
    return SeparableFlux(
        dim, (prof,) * dim, StepCoefficient(), (lo, hi), spec={"kind": "zero", "dim": dim, "lambda_window": [lo, hi]}
    )


def two_rock_flux(base: FluxModel, k_left: float, k_right: float, jump_at: float) -> SeparableFlux:
    """``f(x, λ) = k(x) · base(λ)`` with ``k`` jumping at ``x_1 = jump_at``.

    On the periodic box the interface is paired with a seam at ``x_1 = ±L``,
    so the reported ``mu_mass`` counts two interfaces.
    """
    if not isinstance(base, SeparableFlux) or not base.homogeneous:
        raise ValueError("two_rock needs a homogeneous separable base flux")
    if not (k_left > 0 and k_right > 0):
        raise NonPositivePermeability(f"permeabilities must be positive, got {k_left}, {k_right}")
    k0 = base.coefficient.base
    coef = StepCoefficient(k_left * k0, ((float(jump_at), (k_right - k_left) * k0),))
    mu = 2.0 * abs(k_right - k_left) * k0 * base.sup_abs()
    spec = {
        "kind": "two_rock",
        "base": base.spec,
        "k_left": k_left,
        "k_right": k_right,
        "jump_at": jump_at,
    }
    return SeparableFlux(base.dim, base.profiles, coef, base.lambda_window, mu_mass=mu, beta=base.beta, spec=spec)


def table_flux(x, lam, values, lambda_window=None, spec=None) -> TableFlux:
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    values = np.asarray(values, dtype=float).reshape(x.size, lam.size)
    if lambda_window is None:
        lambda_window = (float(lam[0]), float(lam[-1]))
    dfx = np.gradient(values, x, axis=0) if x.size > 1 else np.zeros_like(values)
    mu = float(integrate.trapezoid(np.max(np.abs(dfx), axis=1), x)) if x.size > 1 else 0.0
    return TableFlux(x, lam, values, tuple(lambda_window), mu_mass=mu, spec=spec or {"kind": "custom-table"})


# mollified flux ---------------------------------------------------------------


class _Tabulated:
    """Cubic spline of a λ-profile, constant outside the table."""

    def __init__(self, lam: np.ndarray, values: np.ndarray):
        self.lo, self.hi = float(lam[0]), float(lam[-1])
        self.spline = CubicSpline(lam, values)
        self.dspline = self.spline.derivative()
        self.anti = self.spline.antiderivative()
        self.v_lo, self.v_hi = float(values[0]), float(values[-1])

    def __call__(self, lam):
        return self.spline(np.clip(lam, self.lo, self.hi))

    def d(self, lam):
        lam = np.asarray(lam, dtype=float)
        inside = (lam > self.lo) & (lam < self.hi)
        return np.where(inside, self.dspline(np.clip(lam, self.lo, self.hi)), 0.0)

    def primitive(self, lam):
        """``∫_0^λ g``, linear continuation outside the table."""
        lam = np.asarray(lam, dtype=float)
        c = np.clip(lam, self.lo, self.hi)
        out = self.anti(c) - self.anti(np.clip(0.0, self.lo, self.hi))
        out = out + np.where(lam > self.hi, (lam - self.hi) * self.v_hi, 0.0)
        out = out + np.where(lam < self.lo, (lam - self.lo) * self.v_lo, 0.0)
        if 0.0 > self.hi:
            out = out - (0.0 - self.hi) * self.v_hi
        elif 0.0 < self.lo:
            out = out - (0.0 - self.lo) * self.v_lo
        return out


def _mollify_profile(p: LambdaProfile, n: float, window) -> _Tabulated:
    lo = min(p.lo - n, window[0]) - 2 * n
    hi = max(p.hi + n, window[1]) + 2 * n
    step = min(n / 64.0, (hi - lo) / 4096.0)
    m = int(np.floor(n / step))
    count = int(np.ceil((hi - lo) / step)) + 1
    lam = lo + step * np.arange(count)
    ext = lo + step * np.arange(-m, count + m)
    w = Mollifier(n).weights(step)
    vals = np.convolve(p(ext), w[::-1], mode="valid")
    return _Tabulated(lam, vals)


class GridFlux:
    """A :class:`MollifiedFlux` evaluated on the nodes of one grid."""

    def __init__(self, flux: "MollifiedFlux", grid: Grid):
        self.flux = flux
        self.grid = grid
        x = grid.coords()
        if flux.kind == "separable":
            self._k = flux._k(x[0])
            self._kp = flux._kprime(x[0])
        self._x = x

    def values(self, u: np.ndarray) -> np.ndarray:
        if self.flux.kind == "separable":
            return np.stack([self._k * g(u) for g in self.flux._g])
        return self.flux.eval(self._x, u)

    def dlambda(self, u: np.ndarray) -> np.ndarray:
        if self.flux.kind == "separable":
            return np.stack([self._k * g.d(u) for g in self.flux._g])
        return self.flux.dlambda(self._x, u)

    def divx(self, u: np.ndarray) -> np.ndarray:
        if self.flux.kind == "separable":
            return self._kp * self.flux._g[0](u)
        return self.flux.divx(self._x, u)

    def divx_primitive(self, u: np.ndarray) -> np.ndarray:
        if self.flux.kind == "separable":
            return self._kp * self.flux._g[0].primitive(u)
        return self.flux.divx_primitive(self._x, u)


class MollifiedFlux:
    r"""Smooth flux ``f_ε = K_ε (f ⋆ ω_n)`` on the box ``[-L, L)^d``.

    Cached norms (over box × λ-window):

    * ``divx_l1``       ``‖div_x f_ε‖_{L¹}``
    * ``divx_l2_linf``  ``‖div_x f_ε‖_{L²(ℝ^d; L^∞(ℝ))}``
    * ``dlambda_sup``   ``‖∂_λ f_ε‖_∞``
    """

    def __init__(self, base: FluxModel, n: float, eps: float, L: float):
        self.base = base
        self.n = float(n)
        self.eps = float(eps)
        self.L = float(L)
        self.dim = base.dim
        self.lambda_window = tuple(base.lambda_window)
        if isinstance(base, SeparableFlux):
            self.kind = "separable"
            self._coef = base.coefficient
            self._g = tuple(_mollify_profile(p, self.n, self.lambda_window) for p in base.profiles)
        else:
            self.kind = "table"
            self._build_table()

    # separable pieces
    def _k(self, x1):
        if self._coef.homogeneous:
            return np.full(np.shape(x1), self._coef.base)
        return self._coef.periodic_mollified(x1, self.n, self.L)

    def _kprime(self, x1):
        if self._coef.homogeneous:
            return np.zeros(np.shape(x1))
        return self._coef.periodic_mollified_derivative(x1, self.n, self.L)

    # table pieces
    def _build_table(self):
        base: TableFlux = self.base  # type: ignore[assignment]
        n, L = self.n, self.L
        hx = min(n / 16.0, 2 * L / 512)
        nx = int(np.ceil(2 * L / hx))
        hx = 2 * L / nx
        x = -L + hx * np.arange(nx)
        lo, hi = self.lambda_window
        lo, hi = min(lo, base.lam[0]) - 2 * n, max(hi, base.lam[-1]) + 2 * n
        hl = min(n / 16.0, (hi - lo) / 1024)
        nl = int(np.ceil((hi - lo) / hl)) + 1
        lam = lo + hl * np.arange(nl)
        vals = base.eval(x[:, None], lam[None, :])[0]
        wx = Mollifier(n).weights(hx)
        wl = Mollifier(n).weights(hl)
        vals = ndimage.convolve1d(vals, wx, axis=0, mode="wrap")
        vals = ndimage.convolve1d(vals, wl, axis=1, mode="nearest")
        # close the period so the spline sees x = L as well
        xe = np.append(x, L)
        ve = np.vstack([vals, vals[:1]])
        self._tx, self._tl = xe, lam
        self._ts = RectBivariateSpline(xe, lam, ve, kx=3, ky=3)
        dfx = self._ts(xe, lam, dx=1)
        prim = integrate.cumulative_trapezoid(dfx, lam, axis=1, initial=0.0)
        i0 = np.searchsorted(lam, 0.0)
        i0 = min(max(i0, 0), lam.size - 1)
        prim = prim - prim[:, i0 : i0 + 1]
        self._tprim = RectBivariateSpline(xe, lam, prim, kx=3, ky=3)

    def _wrap(self, x1):
        return (np.asarray(x1, dtype=float) + self.L) % (2 * self.L) - self.L

    # public evaluation
    def eval(self, x, lam) -> np.ndarray:
        x = _as_coords(x, self.dim)
        if self.kind == "separable":
            k = self._k(x[0])
            return np.stack([np.broadcast_to(k * g(lam), np.broadcast(k, lam).shape) for g in self._g])
        xx, ll = np.broadcast_arrays(self._wrap(x[0]), np.clip(lam, self._tl[0], self._tl[-1]))
        return self._ts.ev(xx, ll)[None]

    def dlambda(self, x, lam) -> np.ndarray:
        x = _as_coords(x, self.dim)
        if self.kind == "separable":
            k = self._k(x[0])
            return np.stack([np.broadcast_to(k * g.d(lam), np.broadcast(k, lam).shape) for g in self._g])
        xx, ll = np.broadcast_arrays(self._wrap(x[0]), np.clip(lam, self._tl[0], self._tl[-1]))
        return self._ts.ev(xx, ll, dy=1)[None]

    def divx(self, x, lam) -> np.ndarray:
        x = _as_coords(x, self.dim)
        if self.kind == "separable":
            kp = self._kprime(x[0])
            return np.broadcast_to(kp * self._g[0](lam), np.broadcast(kp, lam).shape)
        xx, ll = np.broadcast_arrays(self._wrap(x[0]), np.clip(lam, self._tl[0], self._tl[-1]))
        return self._ts.ev(xx, ll, dx=1)

    def divx_primitive(self, x, u) -> np.ndarray:
        """``∫_0^u div_x f_ε(x, λ) dλ``."""
        x = _as_coords(x, self.dim)
        if self.kind == "separable":
            return self._kprime(x[0]) * self._g[0].primitive(u)
        xx, uu = np.broadcast_arrays(self._wrap(x[0]), np.asarray(u, dtype=float))
        return self._tprim.ev(xx, np.clip(uu, self._tl[0], self._tl[-1]))

    def on_grid(self, grid: Grid) -> GridFlux:
        return GridFlux(self, grid)

    # cached norms over box × window
    def _x_quadrature(self):
        hx = min(self.n / 40.0, 2 * self.L / 2048)
        nx = int(np.ceil(2 * self.L / hx))
        return -self.L + (2 * self.L / nx) * np.arange(nx), 2 * self.L / nx

    def _lam_quadrature(self):
        lo, hi = self.lambda_window
        count = int(max(2001, np.ceil((hi - lo) / (self.n / 40.0)) + 1))
        return np.linspace(lo, hi, count)

    @cached_property
    def divx_l1(self) -> float:
        x, hx = self._x_quadrature()
        lam = self._lam_quadrature()
        side = (2 * self.L) ** (self.dim - 1)
        if self.kind == "separable":
            kx = np.sum(np.abs(self._kprime(x))) * hx
            gl = integrate.trapezoid(np.abs(self._g[0](lam)), lam)
            return float(side * kx * gl)
        vals = np.abs(self.divx(x[:, None], lam[None, :]))
        return float(np.sum(integrate.trapezoid(vals, lam, axis=1)) * hx)

    @cached_property
    def divx_l2_linf(self) -> float:
        x, hx = self._x_quadrature()
        lam = self._lam_quadrature()
        side = (2 * self.L) ** (self.dim - 1)
        if self.kind == "separable":
            kx = np.sum(self._kprime(x) ** 2) * hx
            gsup = np.max(np.abs(self._g[0](lam)))
            return float(np.sqrt(side * kx) * gsup)
        sup = np.max(np.abs(self.divx(x[:, None], lam[None, :])), axis=1)
        return float(np.sqrt(np.sum(sup**2) * hx))

    @cached_property
    def dlambda_sup(self) -> float:
        x, _ = self._x_quadrature()
        if self.kind == "separable":
            ksup = np.max(np.abs(self._k(x)))
            out = 0.0
            for g in self._g:
                lam = np.linspace(g.lo, g.hi, 20001)
                out = max(out, float(np.max(np.abs(g.d(lam)))))
            return float(ksup * out)
        lam = np.linspace(self._tl[0], self._tl[-1], 4001)
        return float(np.max(np.abs(self.dlambda(x[:, None], lam[None, :]))))

    def norms(self) -> dict:
        return {
            "divx_l1": self.divx_l1,
            "divx_l2_linf": self.divx_l2_linf,
            "dlambda_sup": self.dlambda_sup,
        }


def mollify(base: FluxModel, n: float, eps: float, L: float) -> MollifiedFlux:
    """Mollify ``base`` with width ``n`` for use on the box ``[-L, L)^d``.

    Raises :class:`CutoffTooTight` unless box × λ-window lies inside
    ``B(0, 1/eps)``, where the cutoff ``K_ε`` is one.
    """
    if not n > 0:
        raise NonPositiveWidth(f"mollification width must be positive, got {n}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    lam_max = max(abs(v) for v in base.lambda_window)
    corner = np.sqrt(base.dim * L**2 + lam_max**2)
    if corner >= 1.0 / eps:
        raise CutoffTooTight(f"box corner |(x, λ)| = {corner:.3g} is not inside B(0, 1/eps = {1 / eps:.3g})")
    if isinstance(base, SeparableFlux):
        for p, _ in base.coefficient.jumps:
            if not -L < p < L:
                raise ValueError(f"jump at {p} lies outside the box [-{L}, {L})")
    return MollifiedFlux(base, n, eps, L)


# non-degeneracy ---------------------------------------------------------------


@dataclass(frozen=True)
class NondegeneracyReport:
    max_fraction: float
    worst_x: np.ndarray
    worst_xi: np.ndarray
    threshold: float
    degenerate: bool


def sphere_directions(dim: int, count: int | None = None) -> np.ndarray:
    """Unit vectors ``(ξ_0, ξ_1, ..., ξ_d)``: uniform circle for d=1, Fibonacci sphere for d=2."""
    if dim == 1:
        count = count or 64
        th = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    if dim == 2:
        count = count or 512
        i = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * i / count)
        th = np.pi * (1 + 5**0.5) * i
        return np.column_stack([np.cos(phi), np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th)])
    raise ValueError("dim must be 1 or 2")


def check_nondegeneracy(
    flux: FluxModel,
    x_samples,
    xi_samples=None,
    lambda_grid=None,
    zero_tol: float = 1e-6,
) -> NondegeneracyReport:
    """Largest λ-fraction on which ``ξ_0 + Σ_k F_k(x, λ) ξ_k`` is below ``zero_tol``.

    ``x_samples`` has shape ``(K, dim)`` (or ``(K,)`` in 1D); ``xi_samples``
    has shape ``(J, dim + 1)``.  The flux is flagged degenerate when the
    fraction exceeds two λ-cells.
    """
    x_samples = np.asarray(x_samples, dtype=float)
    if x_samples.ndim == 1:
        x_samples = x_samples[:, None]
    if xi_samples is None:
        xi_samples = sphere_directions(flux.dim)
    xi_samples = np.asarray(xi_samples, dtype=float)
    if lambda_grid is None:
        # the frozen tails are degenerate by construction; test where f varies
        lo, hi = flux.lambda_window
        if isinstance(flux, SeparableFlux):
            lo = max(lo, min(p.lo for p in flux.profiles))
            hi = min(hi, max(p.hi for p in flux.profiles))
        lambda_grid = np.linspace(lo, hi, 10001)
    lam = np.asarray(lambda_grid, dtype=float)
    if x_samples.size == 0 or xi_samples.size == 0 or lam.size == 0:
        raise EmptySampleSet("need at least one x sample, one direction and one λ point")
    if xi_samples.shape[1] != flux.dim + 1:
        raise ValueError(f"directions need {flux.dim + 1} components")
    best = (-1.0, None, None)
    for xs in x_samples:
        coords = tuple(np.full(lam.shape, c) for c in xs)
        F = flux.dlambda(coords if flux.dim > 1 else coords[0], lam)  # (dim, M)
        vals = xi_samples[:, :1] + xi_samples[:, 1:] @ F  # (J, M)
        frac = np.mean(np.abs(vals) < zero_tol, axis=1)
        j = int(np.argmax(frac))
        if frac[j] > best[0]:
            best = (float(frac[j]), xs.copy(), xi_samples[j].copy())
    threshold = 2.0 / lam.size
    return NondegeneracyReport(best[0], best[1], best[2], threshold, best[0] > threshold)


# configuration ----------------------------------------------------------------


def flux_from_spec(spec: dict, base_dir: Path | str | None = None) -> FluxModel:
    """Build a flux from a config mapping (``kind`` plus parameters)."""
    kind = spec.get("kind")
    window = spec.get("lambda_window")
    if kind == "buckley_leverett":
        return buckley_leverett(spec.get("A", 1.0), tuple(window or (-0.2, 1.2)))
    if kind == "linear":
        return linear_flux(spec.get("c", 1.0), tuple(window or (-10.0, 10.0)))
    if kind == "zero":
        return zero_flux(spec.get("dim", 1), tuple(window or (-10.0, 10.0)))
    if kind == "two_rock":
        base_spec = spec.get("base", {"kind": "buckley_leverett", "A": spec.get("A", 1.0)})
        if window is not None and "lambda_window" not in base_spec:
            base_spec = dict(base_spec, lambda_window=window)
        base = flux_from_spec(base_spec, base_dir)
        return two_rock_flux(base, spec["k_left"], spec["k_right"], spec.get("jump_at", 0.0))
    if kind == "custom-table":
        path = Path(spec["file"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        data = np.loadtxt(path, ndmin=2)
        x = np.unique(data[:, 0])
        lam = np.unique(data[:, 1])
        order = np.lexsort((data[:, 1], data[:, 0]))
        values = data[order, 2].reshape(x.size, lam.size)
        return table_flux(x, lam, values, tuple(window) if window else None, spec=dict(spec, file=str(path.resolve())))
    raise ValueError(f"unknown flux kind {kind!r}")


def load_flux_config(path) -> FluxModel:
    path = Path(path)
    with open(path) as fh:
        spec = json.load(fh)
    return flux_from_spec(spec.get("flux", spec), base_dir=path.parent)
