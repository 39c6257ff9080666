import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyncap.errors import SymmetryViolation
from dyncap.grid import (
    Grid,
    RealField,
    SpectralField,
    boundary_mass_fraction,
    forward_transform,
    gradient,
    inverse_transform,
    l2_norm,
    l2_norm_gradient,
    laplacian,
    read_snapshot,
    write_snapshot,
)


def test_constant_transform_has_only_the_mean_mode():
    g = Grid(1, np.pi, 64)
    F = forward_transform(RealField(g, np.ones(g.shape)))
    assert F.coefficients[0] == pytest.approx(2 * np.pi, abs=1e-12)
    assert np.max(np.abs(F.coefficients[1:])) < 1e-12


def test_cosine_mode_has_coefficient_L():
    # ∫_{-L}^{L} cos(πx/L) e^{∓iπx/L} dx = L
    g = Grid(1, 3.0, 32)
    F = forward_transform(g.sample(lambda x: np.cos(np.pi * x / g.L)))
    c = F.coefficients
    assert c[1] == pytest.approx(g.L, abs=1e-12)
    assert c[-1] == pytest.approx(g.L, abs=1e-12)
    c = c.copy()
    c[[1, -1]] = 0
    assert np.max(np.abs(c)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([1, 2]), logN=st.integers(3, 7))
def test_round_trip_is_identity(seed, dim, logN):
    g = Grid(dim, 1.7, 2**logN)
    u = np.random.default_rng(seed).standard_normal(g.shape)
    back = inverse_transform(forward_transform(RealField(g, u)))
    assert np.max(np.abs(back.values - u)) < 1e-12


def test_symmetric_pair_gives_real_cosine():
    g = Grid(1, np.pi, 16)
    c = np.zeros(16, complex)
    c[1] = c[-1] = 1.0
    u = inverse_transform(SpectralField(g, c))
    # (1/2L)(e^{iξx} + e^{-iξx}) with ξ = 1 on L = π
    assert np.allclose(u.values, np.cos(g.x1d) / np.pi, atol=1e-14)


def test_broken_symmetry_is_rejected():
    g = Grid(1, 1.0, 16)
    c = np.zeros(16, complex)
    c[1] = 1.0
    with pytest.raises(SymmetryViolation):
        inverse_transform(SpectralField(g, c))


def test_derivatives_of_eigenfunctions():
    g = Grid(1, 2.0, 64)
    k = np.pi / g.L
    s = g.sample(lambda x: np.sin(k * x))
    assert np.max(np.abs(gradient(s).values - k * np.cos(k * g.x1d))) < 1e-10
    c3 = g.sample(lambda x: np.cos(3 * k * x))
    assert np.allclose(laplacian(c3).values, -((3 * k) ** 2) * c3.values, atol=1e-10)
    assert np.max(np.abs(laplacian(RealField(g, np.full(g.shape, 4.2))).values)) < 1e-12


def test_gradient_in_two_dimensions():
    g = Grid(2, 1.0, 32)
    k = np.pi / g.L
    f = g.sample(lambda x, y: np.sin(k * x) * np.cos(2 * k * y))
    x, y = g.coords()
    assert np.allclose(gradient(f, 1).values, -2 * k * np.sin(k * x) * np.sin(2 * k * y), atol=1e-10)


def test_norm_of_constants_and_zero():
    g = Grid(2, 1.5, 16)
    assert l2_norm(RealField(g, np.zeros(g.shape))) == 0.0
    assert l2_norm(RealField(g, np.full(g.shape, -2.0))) == pytest.approx(2.0 * (2 * g.L) ** (g.dim / 2), rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_plancherel_matches_quadrature(seed):
    g = Grid(1, 2.5, 64)
    u = RealField(g, np.random.default_rng(seed).standard_normal(g.shape))
    F = forward_transform(u)
    spectral = np.sqrt(np.sum(np.abs(F.coefficients) ** 2) / g.measure)
    assert spectral == pytest.approx(l2_norm(u), rel=1e-10)
    du = gradient(u)
    # gradient drops the Nyquist mode, Plancherel keeps it; compare without it
    c = F.coefficients.copy()
    c[g.N // 2] = 0
    trimmed = inverse_transform(SpectralField(g, c))
    assert l2_norm_gradient(trimmed) == pytest.approx(l2_norm(du), rel=1e-10)


def test_boundary_mass_fraction():
    g = Grid(1, 1.0, 64)
    assert boundary_mass_fraction(RealField(g, np.zeros(g.shape))) == 0.0
    bump = g.sample(lambda x: np.exp(-100 * x**2))
    assert boundary_mass_fraction(bump) < 1e-12
    edge = g.sample(lambda x: (np.abs(x) > 0.95).astype(float))
    assert boundary_mass_fraction(edge) == 1.0


def test_snapshot_round_trip_is_bit_exact(tmp_path):
    g = Grid(2, 0.75, 8)
    u = RealField(g, np.random.default_rng(1).standard_normal(g.shape))
    write_snapshot(tmp_path / "s.txt", u, 0.125)
    back, t = read_snapshot(tmp_path / "s.txt")
    assert t == 0.125 and back.grid == g
    assert np.array_equal(back.values, u.values)
    assert (tmp_path / "s.txt").read_text().splitlines()[0] == "# dim L N t"


@pytest.mark.parametrize("kwargs", [dict(dim=3, L=1.0, N=8), dict(dim=1, L=1.0, N=12), dict(dim=1, L=0.0, N=8)])
def test_grid_validation(kwargs):
    with pytest.raises(ValueError):
        Grid(**kwargs)
