r"""Periodic grids and Fourier machinery.

The box is :math:`[-L, L)^d` sampled with ``N`` points per axis. The discrete
transform is scaled to mimic the continuous convention

.. math::

    \hat u(\xi) = \int e^{-i x\cdot\xi} u(x)\,dx, \qquad
    u(x) = (2\pi)^{-d}\int e^{i x\cdot\xi}\hat u(\xi)\,d\xi,

so a constant field ``c`` has ``û(0) = c (2L)^d`` and the inverse carries the
factor ``(2L)^{-d}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SymmetryViolation

__all__ = [
    "Grid",
    "RealField",
    "SpectralField",
    "SymmetryViolation",
    "forward_transform",
    "inverse_transform",
    "apply_symbol",
    "gradient",
    "laplacian",
    "l2_norm",
    "l2_norm_gradient",
    "boundary_mass_fraction",
    "write_snapshot",
    "read_snapshot",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)^dim``."""

    dim: int
    L: float
    N: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"half width must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def measure(self) -> float:
        return (2.0 * self.L) ** self.dim

    @property
    def x1d(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @property
    def xi1d(self) -> np.ndarray:
        """Wavenumbers ``πk/L`` in FFT order."""
        return np.pi / self.L * np.fft.fftfreq(self.N, d=1.0 / self.N)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates, one broadcastable array per axis."""
        return tuple(np.meshgrid(*([self.x1d] * self.dim), indexing="ij"))

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.xi1d] * self.dim), indexing="ij"))

    def rwavenumbers(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers matching ``numpy.fft.rfftn`` output layout."""
        half = np.pi / self.L * np.arange(self.N // 2 + 1)
        axes = [self.xi1d] * (self.dim - 1) + [half]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def rdealias_mask(self) -> np.ndarray:
        """2/3-rule mask in rfftn layout: keep ``|k| < N/3`` on every axis."""
        kmax = self.N / 3.0
        k = np.fft.fftfreq(self.N, d=1.0 / self.N)
        khalf = np.arange(self.N // 2 + 1)
        axes = [np.abs(k) < kmax] * (self.dim - 1) + [khalf < kmax]
        mask = np.ones(tuple(a.size for a in axes), dtype=bool)
        for i, a in enumerate(axes):
            shape = [1] * self.dim
            shape[i] = a.size
            mask = mask & a.reshape(shape)
        return mask

    def _phase(self) -> np.ndarray:
        # e^{iLξ_k} = (-1)^k per axis, accounts for the box starting at -L
        k = np.fft.fftfreq(self.N, d=1.0 / self.N).astype(int)
        s = np.where(k % 2 == 0, 1.0, -1.0)
        out = np.ones(self.shape)
        for i in range(self.dim):
            shape = [1] * self.dim
            shape[i] = self.N
            out = out * s.reshape(shape)
        return out

    def sample(self, func: Callable[..., np.ndarray]) -> "RealField":
        return RealField(self, np.asarray(func(*self.coords()), dtype=float))


@dataclass(frozen=True)
class RealField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other: "RealField") -> "RealField":
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other: "RealField") -> "RealField":
        return RealField(self.grid, self.values - other.values)

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)


@dataclass(frozen=True)
class SpectralField:
    grid: Grid
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {c.shape}")
        object.__setattr__(self, "coefficients", c)


def forward_transform(f: RealField) -> SpectralField:
    g = f.grid
    coef = np.fft.fftn(f.values) * g.cell_volume * g._phase()
    return SpectralField(g, coef)


def inverse_transform(F: SpectralField) -> RealField:
    g = F.grid
    u = np.fft.ifftn(F.coefficients * g._phase()) / g.cell_volume
    scale = np.max(np.abs(u.real)) if u.size else 0.0
    if np.max(np.abs(u.imag), initial=0.0) > 1e-8 * max(scale, 1e-300):
        raise SymmetryViolation(
            "imaginary part of reconstruction exceeds 1e-8 relative; "
            "coefficients lack conjugate symmetry"
        )
    return RealField(g, u.real)


def apply_symbol(F: SpectralField, symbol: Callable[..., np.ndarray]) -> SpectralField:
    """Multiply coefficients by ``symbol(ξ_1, ..., ξ_d)``."""
    s = np.broadcast_to(symbol(*F.grid.wavenumbers()), F.grid.shape)
    if not np.all(np.isfinite(s)):
        raise ValueError("symbol is not finite on the grid wavenumbers")
    return SpectralField(F.grid, F.coefficients * s)


def _odd_symbol(grid: Grid, axis: int) -> np.ndarray:
    xi = grid.wavenumbers()[axis].copy()
    # Nyquist mode has no conjugate partner; drop it for odd derivatives
    nyq = np.isclose(np.abs(xi), np.pi / grid.L * grid.N / 2)
    xi[nyq] = 0.0
    return 1j * xi


def gradient(f: RealField, axis: int = 0) -> RealField:
    F = forward_transform(f)
    sym = _odd_symbol(f.grid, axis)
    return inverse_transform(SpectralField(f.grid, F.coefficients * sym))


def laplacian(f: RealField) -> RealField:
    F = apply_symbol(forward_transform(f), lambda *xi: -sum(x**2 for x in xi))
    return inverse_transform(F)


def l2_norm(f: RealField) -> float:
    return float(np.sqrt(np.sum(f.values**2) * f.grid.cell_volume))


def l2_norm_gradient(f: RealField) -> float:
    """``‖∇f‖`` by Plancherel: ``(2L)^{-d} Σ |ξ|² |f̂|²``."""
    F = forward_transform(f)
    xi2 = sum(x**2 for x in f.grid.wavenumbers())
    return float(np.sqrt(np.sum(xi2 * np.abs(F.coefficients) ** 2) / f.grid.measure))


def boundary_mass_fraction(f: RealField, layer: float = 0.1) -> float:
    """Share of ``∫|u|`` sitting within ``layer·L`` of the box boundary."""
    g = f.grid
    near = np.zeros(g.shape, dtype=bool)
    for x in g.coords():
        near |= np.abs(x) >= (1.0 - layer) * g.L
    total = np.abs(f.values).sum()
    if total == 0.0:
        return 0.0
    return float(np.abs(f.values[near]).sum() / total)


# snapshot dump ---------------------------------------------------------------

_HEADER = "# dim L N t"


def write_snapshot(path, f: RealField, t: float) -> None:
    """Write ``f`` in the columnar snapshot format.

    Line 1 is the literal ``# dim L N t``; line 2 is ``# <dim> <L> <N> <t>``;
    then one row per node (C order) with the coordinates and the value, every
    float printed with ``%.17e`` so the file round-trips bit-exactly.
    """
    g = f.grid
    cols = [c.ravel() for c in g.coords()] + [f.values.ravel()]
    data = np.column_stack(cols)
    with open(path, "w") as fh:
        fh.write(_HEADER + "\n")
        fh.write(f"# {g.dim} {g.L:.17e} {g.N} {t:.17e}\n")
        np.savetxt(fh, data, fmt="%.17e")


def read_snapshot(path) -> tuple[RealField, float]:
    with open(path) as fh:
        first = fh.readline().strip()
        if first != _HEADER:
            raise ValueError(f"{path}: not a snapshot file")
        _, dim, L, N, t = fh.readline().split()
        data = np.loadtxt(fh, ndmin=2)
    grid = Grid(int(dim), float(L), int(N))
    return RealField(grid, data[:, -1].reshape(grid.shape)), float(t)
