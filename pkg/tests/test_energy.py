import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyncap.energy import (
    ESTIMATES,
    audit_table,
    energy_identity_residual,
    initial_condition_constant,
    verify_estimates,
    verify_initial_condition,
)
from dyncap.errors import MissingTimeDerivative
from dyncap.flux import buckley_leverett, mollify, mollify_field, two_rock_flux, zero_flux
from dyncap.grid import Grid, RealField
from dyncap.solver import SolverConfig, solve


def heat_run(u0, eps=0.1, delta=0.0, T=0.5):
    flux = mollify(zero_flux(), 0.1, 0.05, u0.grid.L)
    return solve(u0, T, SolverConfig(eps, delta, slab_dt=0.05), flux)


@pytest.fixture(scope="module")
def two_rock_run():
    L, eps = 4.0, 0.05
    g = Grid(1, L, 256)
    flux = mollify(two_rock_flux(buckley_leverett(1.0), 1.0, 0.5, 0.5), eps**0.125, eps, L)
    u0 = mollify_field(g.sample(lambda x: 0.1 + 0.7 * np.exp(-2 * (x + 1) ** 2)), eps**0.125)
    return solve(u0, 0.25, SolverConfig(eps, eps**3, slab_dt=1e-3), flux)


def test_heat_identity_on_single_mode():
    g = Grid(1, np.pi, 64)
    traj = heat_run(g.sample(lambda x: np.cos(3 * x)))
    assert np.max(energy_identity_residual(traj)) < 1e-8


@settings(max_examples=10, deadline=None)
@given(coefs=st.lists(st.floats(-1, 1), min_size=4, max_size=4), delta=st.sampled_from([0.0, 0.01]))
def test_heat_identity_on_random_modes(coefs, delta):
    g = Grid(1, np.pi, 32)
    u0 = g.sample(lambda x: sum(c * np.cos((k + 1) * x + k) for k, c in enumerate(coefs)))
    assert np.max(energy_identity_residual(heat_run(u0, delta=delta, T=0.2))) < 1e-8


def test_homogeneous_bl_identity():
    g = Grid(1, 4.0, 256)
    flux = mollify(buckley_leverett(1.0), 0.05, 0.05, 4.0)
    traj = solve(g.sample(lambda x: 0.1 + 0.7 * np.exp(-2 * x**2)), 0.25, SolverConfig(0.05, 0.0025, slab_dt=0.01), flux)
    assert np.max(energy_identity_residual(traj)) < 1e-6


def test_two_rock_identity_and_estimates(two_rock_run):
    assert np.max(energy_identity_residual(two_rock_run)) < 1e-4
    report = verify_estimates(two_rock_run)
    assert report.passed, report.failures()
    for name in ESTIMATES:
        assert report.checks[name].lhs.shape == two_rock_run.times.shape


def test_zero_solution_has_zero_slack():
    g = Grid(1, 1.0, 32)
    report = verify_estimates(heat_run(RealField(g, np.zeros(g.shape)), T=0.1))
    assert report.passed
    for c in report.checks.values():
        assert np.all(c.lhs == 0.0)
        assert np.all(c.slack >= 0.0)


def test_pure_diffusion_first_estimate_has_positive_slack():
    g = Grid(1, np.pi, 64)
    traj = heat_run(g.sample(lambda x: np.sin(x) + 0.5 * np.cos(4 * x)), delta=0.01)
    prva = verify_estimates(traj).checks["prva"]
    assert np.all(prva.slack[1:] > 0)
    # with f ≡ 0 the right side is ‖u₀‖ + √δ‖∇u₀‖ at every time
    assert np.allclose(prva.rhs, prva.rhs[0])


def test_missing_time_derivative():
    g = Grid(1, np.pi, 32)
    traj = dataclasses.replace(heat_run(g.sample(np.cos), T=0.1), dt_states=None)
    with pytest.raises(MissingTimeDerivative):
        verify_estimates(traj)


def test_audit_table_shape(two_rock_run):
    header, rows = audit_table(verify_estimates(two_rock_run))
    assert len(header) == 1 + 4 * len(ESTIMATES)
    assert len(rows) == len(two_rock_run.times)
    assert all(len(r) == len(header) for r in rows)


# initial-data condition ------------------------------------------------------


def test_initial_condition_on_single_mode():
    # ‖cos kx‖ = √L on [-L, L); each derivative multiplies by k
    g = Grid(1, np.pi, 64)
    k = 2
    u = g.sample(lambda x: np.cos(k * x))
    lhs = math.sqrt(np.pi) * (1 + k + k**2)
    assert verify_initial_condition(u, 1.0, lhs + 1e-10)
    assert not verify_initial_condition(u, 1.0, lhs - 1e-10)


def test_initial_condition_zero_data():
    g = Grid(1, 1.0, 32)
    assert verify_initial_condition(RealField(g, np.zeros(g.shape)), 0.1, 0.0)


def test_mollified_family_meets_width_independent_constant():
    g = Grid(1, 2.0, 1024)
    u0 = g.sample(lambda x: np.where(np.abs(x) < 0.7, 1.0, 0.0))
    C0 = initial_condition_constant(u0)
    for n in (0.2, 0.1, 0.05):
        assert verify_initial_condition(mollify_field(u0, n), n, C0)
