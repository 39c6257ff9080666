import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyncap.bench import ScalingSchedule
from dyncap.errors import GridMismatch, InconsistentRuns, RangeEscape, SupportEscape
from dyncap.flux import buckley_leverett, linear_flux, mollify, mollify_field, zero_flux
from dyncap.grid import Grid, RealField
from dyncap.kinetic import (
    LambdaGrid,
    compactness_probe,
    defect_bundle,
    defect_decay_study,
    entropy_reconstruction,
    kinetic_function,
    lattice_truncation,
    theory_bounds,
    translation_modulus,
    truncation,
    velocity_average,
)
from dyncap.solver import SolverConfig, solve

SYM = LambdaGrid(-1.2, 1.2, 256)


def frozen(values, L=2.0):
    """A zero-horizon trajectory holding one state."""
    g = Grid(1, L, values.size)
    return solve(RealField(g, values), 0.0, SolverConfig(0.1), mollify(linear_flux(1.0), 0.1, 0.05, L))


@pytest.fixture(scope="module")
def bl_run():
    g = Grid(1, 4.0, 256)
    flux = mollify(buckley_leverett(1.0), 0.05**0.125, 0.05, 4.0)
    u0 = mollify_field(g.sample(lambda x: 0.1 + 0.8 * np.exp(-2 * x**2)), 0.05**0.125)
    return solve(u0, 0.25, SolverConfig(0.05, 0.05**3, slab_dt=0.01), flux)


def test_sign_convention():
    traj = frozen(np.full(16, 0.3))
    lam = LambdaGrid(-1.0, 1.0, 81)
    h = kinetic_function(traj, lam).slice(0)[0]
    assert h[40] == 1 and h[60] == -1
    tie = kinetic_function(frozen(np.full(16, lam.values[50])), lam).slice(0)[0]
    assert tie[50] == 1


def test_monotone_in_lambda(bl_run):
    cube = kinetic_function(bl_run, SYM)
    assert cube.is_monotone()
    assert cube.values().shape == cube.shape


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), l=st.floats(0.05, 1.2))
def test_truncation_identity_within_one_cell(seed, l):
    u = np.random.default_rng(seed).uniform(-1.1, 1.1, 64)
    cube = kinetic_function(frozen(u), SYM)
    err = np.max(np.abs(lattice_truncation(cube, l, 0).values - truncation(u, l)))
    assert err <= SYM.spacing


def test_truncation_operator():
    assert truncation(np.array([5.0]), 2.0)[0] == 2.0
    u = np.linspace(-1, 1, 11)
    assert np.array_equal(truncation(u, 1.0), u)
    with pytest.raises(ValueError):
        truncation(u, 0.0)


def test_truncation_l1_bound_on_spiky_field():
    g = Grid(1, 1.0, 1024)
    u = g.sample(lambda x: 0.2 + 8.0 * np.exp(-((x / 0.01) ** 2)) - 6.0 * np.exp(-(((x - 0.5) / 0.02) ** 2)))
    for l in (0.5, 1.0, 3.0):
        lhs = np.sum(np.abs(truncation(u, l).values - u.values)) * g.h
        meas = np.sum(np.abs(u.values) > l) * g.h
        rhs = math.sqrt(meas) * math.sqrt(np.sum(u.values**2) * g.h)
        assert lhs <= rhs


def test_velocity_average_of_indicator_and_zero():
    u = np.random.default_rng(3).uniform(-0.9, 0.9, 32)
    cube = kinetic_function(frozen(u), SYM)
    l = 0.6
    rho = (np.abs(SYM.values) <= l).astype(float)
    avg = velocity_average(cube, rho)[0]
    assert np.max(np.abs(avg.values - 2 * truncation(u, l))) <= 2 * SYM.spacing
    assert np.all(velocity_average(cube, np.zeros(SYM.count))[0].values == 0.0)


def test_velocity_average_odd_weight_at_the_centre():
    lam = LambdaGrid(-1.0, 1.0, 101)
    cube = kinetic_function(frozen(np.zeros(16)), lam)
    rho = lambda s: np.where(np.abs(s) <= 1.0, s**3, 0.0)
    w = lam.trapezoid_weights() * rho(lam.values)
    upper = lam.values >= 0
    # h = +1 below u = 0 and -1 above, so the sign is flipped relative to ρ
    expected = -w[upper].sum() + w[~upper].sum()
    assert np.allclose(velocity_average(cube, rho)[0].values, expected, atol=1e-15)


def test_support_escape():
    cube = kinetic_function(frozen(np.zeros(16)), SYM)
    with pytest.raises(SupportEscape):
        velocity_average(cube, lambda s: np.ones_like(s))


def test_range_escape():
    with pytest.raises(RangeEscape):
        kinetic_function(frozen(np.full(16, 2.0)), SYM)


def test_entropy_reconstruction(bl_run):
    cube = kinetic_function(bl_run, SYM)
    avg, exact = entropy_reconstruction(cube)
    assert np.max(np.abs(avg.values - exact.values)) < 4 * SYM.spacing


# defects ----------------------------------------------------------------------


def test_constant_state_has_no_defects():
    g = Grid(1, 2.0, 64)
    traj = solve(RealField(g, np.full(g.shape, 0.4)), 0.1, SolverConfig(0.1, 0.01, slab_dt=0.05), mollify(buckley_leverett(), 0.1, 0.1, 2.0))
    b = defect_bundle(traj, SYM)
    assert b.gamma1_proxy == b.gamma2_proxy == b.gamma3_l1 == b.gamma4_l1 == 0.0


def test_pure_diffusion_has_no_capillary_defects():
    g = Grid(1, np.pi, 64)
    traj = solve(g.sample(lambda x: 0.5 * np.sin(x)), 0.2, SolverConfig(0.1, 0.0, slab_dt=0.05), mollify(zero_flux(), 0.1, 0.05, g.L))
    b = defect_bundle(traj, SYM)
    assert b.gamma2_proxy == 0.0 and b.gamma4_l1 == 0.0
    F = b.fields(1)
    assert np.all(F["gamma2"] == 0) and np.all(F["gamma4"] == 0)
    h = b.cube.slice(1).astype(float)
    assert np.allclose(F["gamma3"], 2 * 0.1 * h * F["grad_abs"][..., None] ** 2)


def test_pointwise_defect_bounds(bl_run):
    b = defect_bundle(bl_run, SYM)
    assert b.pointwise_bounds_hold()
    assert b.gamma4_l1 <= b.gamma4_bound * (1 + 1e-12)


def test_theory_columns():
    eps, delta, n, d = 0.05, 0.05**3, 0.05**0.125, 1
    se, sd = math.sqrt(eps), math.sqrt(delta)
    bracket = 2 / (se * n ** (d + 1)) + (sd / (se * n ** (d + 1)) + se) / n + 1 / n ** (d / 2 + 1)
    t = theory_bounds(eps, delta, n, d)
    assert t["gamma1_theory"] == pytest.approx(se * (sd / n + 1), rel=1e-12)
    assert t["gamma2_theory"] == pytest.approx(sd * bracket, rel=1e-12)
    assert t["gamma4_theory"] == pytest.approx(sd * (1 / se + sd / (se * n)) * bracket, rel=1e-12)


def test_decay_study_along_cubic_schedule():
    sched = ScalingSchedule(3.0, 0.125, epsilon_list=(0.1, 0.05, 0.025))
    g = Grid(1, 4.0, 256)
    runs = []
    for eps in sched.epsilon_list:
        n = sched.n(eps)
        u0 = mollify_field(g.sample(lambda x: 0.1 + 0.8 * np.exp(-2 * x**2)), n)
        traj = solve(u0, 0.25, SolverConfig(eps, sched.delta(eps), slab_dt=0.01), mollify(buckley_leverett(), n, eps, 4.0))
        traj.meta["u0"] = "bump"
        runs.append(traj)
    table = defect_decay_study(sched, runs, SYM)
    g1 = [r["gamma1_proxy"] for r in table.rows]
    assert all(b / a <= 1 for a, b in zip(g1, g1[1:]))
    assert table.gamma1_decreasing
    with pytest.raises(InconsistentRuns):
        defect_decay_study(sched, runs[::-1], SYM)
    with pytest.raises(InconsistentRuns):
        defect_decay_study(ScalingSchedule(2.5, 0.125, epsilon_list=(0.1, 0.05, 0.025)), runs, SYM)


def test_delta_zero_runs_have_vanishing_capillary_defects():
    g = Grid(1, 4.0, 128)
    runs = []
    for eps in (0.1, 0.05):
        traj = solve(g.sample(lambda x: 0.1 + 0.8 * np.exp(-2 * x**2)), 0.1, SolverConfig(eps, 0.0, slab_dt=0.05), mollify(buckley_leverett(), 0.2, eps, 4.0))
        runs.append(traj)
    table = defect_decay_study(None, runs, SYM)
    assert all(r["gamma2_proxy"] == 0.0 and r["gamma4_l1"] == 0.0 for r in table.rows)
    assert table.notes


# compactness ------------------------------------------------------------------


def test_identical_runs_have_zero_distance(bl_run):
    cube = kinetic_function(bl_run, SYM)
    avg = velocity_average(cube, np.ones(SYM.count))
    rep = compactness_probe([avg, avg, avg])
    assert rep.distances == [0.0, 0.0]


def test_white_noise_translation_modulus_does_not_vanish():
    rng = np.random.default_rng(7)
    moduli = []
    for N in (64, 256, 1024):
        g = Grid(1, 1.0, N)
        moduli.append(translation_modulus(RealField(g, rng.standard_normal(N))))
    assert min(moduli) > 0.5
    smooth = [translation_modulus(Grid(1, 1.0, N).sample(np.sin)) for N in (64, 256, 1024)]
    assert smooth[0] > smooth[1] > smooth[2]


def test_grid_mismatch():
    a = Grid(1, 1.0, 32).sample(np.sin)
    b = Grid(1, 1.0, 64).sample(np.sin)
    with pytest.raises(GridMismatch):
        compactness_probe([a, b])
