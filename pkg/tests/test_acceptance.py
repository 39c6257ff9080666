"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line with the measured numbers, then
asserts.  Runs are 1D and desk-sized; the whole file takes about a minute and
a half on one core.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from dyncap.bench import ScalingSchedule, SweepSettings, emit_report, initial_profile, overshoot_scan, run_sweep
from dyncap.energy import energy_identity_residual, verify_estimates
from dyncap.flux import buckley_leverett, linear_flux, mollify, mollify_field, two_rock_flux
from dyncap.grid import Grid, RealField, l2_norm
from dyncap.kinetic import LambdaGrid, kinetic_function, lattice_truncation, truncation
from dyncap.reference import bl_riemann_exact
from dyncap.solver import SolverConfig, solve

BL = {"kind": "buckley_leverett", "A": 1.0}
TWO_ROCK = {"kind": "two_rock", "base": BL, "k_left": 1.0, "k_right": 0.5, "jump_at": 0.5}
RIEMANN = {"kind": "riemann", "S_L": 1.0, "S_R": 0.0, "x0": -0.5}


@pytest.fixture
def verdict(capsys):
    def report(label, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
        assert ok, detail

    return report


def riemann_run(flux, N, L, eps, delta, n, T, slab_dt):
    g = Grid(1, L, N)
    u0 = mollify_field(RealField(g, initial_profile(RIEMANN, g)(g.x1d)), n)
    return solve(u0, T, SolverConfig(eps, delta, slab_dt=slab_dt), mollify(flux, n, eps, L))


# sweeps shared by several criteria --------------------------------------------------

DECAY_SCHEDULE = ScalingSchedule(3.0, 0.125, regime="i", epsilon_list=(0.1, 0.05, 0.025))
CONVERGENCE_SCHEDULE = ScalingSchedule(3.0, 0.125, regime="iii", epsilon_list=(0.1, 0.05, 0.025, 0.0125))
CONVERGENCE_SETTINGS = SweepSettings(
    flux=BL, u0=RIEMANN, T=0.5, N=1024, L=2.0, reference_cells=4096, window=(-1.2, 1.6), kinetic=False, overshoot_S_L=1.0
)


def decay_settings(flux):
    # a long horizon, so the defect measures have built up before they are compared
    return SweepSettings(
        flux=flux, u0=dict(RIEMANN, x0=-2.0), T=3.0, N=1024, L=4.0, reference=False, overshoot_S_L=1.0
    )


@pytest.fixture(scope="module")
def decay_sweeps():
    return {name: run_sweep(DECAY_SCHEDULE, decay_settings(f), workers=3) for name, f in (("BL", BL), ("two_rock", TWO_ROCK))}


@pytest.fixture(scope="module")
def convergence_sweep():
    start = time.perf_counter()
    result = run_sweep(CONVERGENCE_SCHEDULE, CONVERGENCE_SETTINGS)
    return result, time.perf_counter() - start


# 1 ----------------------------------------------------------------------------------


def test_c1_spectral_correctness(verdict):
    c, eps, delta, N, T = 1.0, 0.05, 0.0025, 256, 0.5
    g = Grid(1, math.pi, N)
    u0 = g.sample(lambda x: np.exp(np.sin(x)) + 0.3 * np.cos(3 * x))
    start = time.perf_counter()
    traj = solve(u0, T, SolverConfig(eps, delta, slab_dt=0.05), mollify(linear_flux(c), 0.01, eps, g.L))
    elapsed = time.perf_counter() - start

    # oracle: every Fourier mode integrated on its own by an implicit stiff ODE solver
    xi = np.fft.rfftfreq(N, d=1.0 / N) * np.pi / g.L
    advect = np.arange(xi.size) < N / 3  # the solver dealiases the flux term
    rate = -(eps * xi**2 + 1j * c * xi * advect) / (1 + delta * xi**2)
    U0 = np.fft.rfft(u0.values)
    UT = np.empty_like(U0)
    for k in range(xi.size):
        A = np.array([[rate[k].real, -rate[k].imag], [rate[k].imag, rate[k].real]])
        sol = integrate.solve_ivp(
            lambda t, y: A @ y, (0, T), [U0[k].real, U0[k].imag], method="Radau", jac=A, rtol=1e-12, atol=1e-12 * N
        )
        UT[k] = sol.y[0, -1] + 1j * sol.y[1, -1]
    oracle = RealField(g, np.fft.irfft(UT, n=N))
    err = l2_norm(oracle - traj.final)
    verdict("C1 spectral correctness", err < 1e-8 and elapsed < 10, f"L2 error {err:.2e}, solve {elapsed:.2f} s")


# 2 ----------------------------------------------------------------------------------


def test_c2_energy_identity(verdict):
    eps = 0.05
    n = eps**0.125
    res = {}
    for name, flux in (("BL", buckley_leverett(1.0)), ("two_rock", two_rock_flux(buckley_leverett(1.0), 1.0, 0.5, 0.5))):
        traj = riemann_run(flux, 512, 4.0, eps, eps**3, n, 0.25, 1e-3)
        res[name] = float(np.max(energy_identity_residual(traj)))
    ok = res["BL"] < 1e-6 and res["two_rock"] < 1e-4
    verdict("C2 energy identity", ok, f"relative residual BL {res['BL']:.2e}, two_rock {res['two_rock']:.2e}")


# 3 ----------------------------------------------------------------------------------


def test_c3_a_priori_estimates_on_every_sweep_run(verdict, decay_sweeps, convergence_sweep):
    records = [r for s in decay_sweeps.values() for r in s.records] + convergence_sweep[0].records
    failing = [r["eps"] for r in records if r["audit_pass"] != 1]
    verdict("C3 a priori estimates", not failing and len(records) == 10, f"{len(records)} runs audited, failing ε: {failing}")


# 4 ----------------------------------------------------------------------------------


def test_c4_gronwall_surrogate(verdict):
    eps, T, L, N = 0.05, 0.25, 4.0, 512
    n = eps**0.125
    g = Grid(1, L, N)
    flux = mollify(buckley_leverett(1.0), n, eps, L)
    cfg = SolverConfig(eps, eps**3, slab_dt=1e-2)
    u0 = mollify_field(RealField(g, initial_profile(RIEMANN, g)(g.x1d)), n)
    eta = g.sample(lambda x: np.sin(3 * np.pi * x / L) + 0.5 * np.cos(7 * np.pi * x / L))
    eta = RealField(g, eta.values * (1e-6 / l2_norm(eta)))
    a = solve(u0, T, cfg, flux).final
    b = solve(u0 + eta, T, cfg, flux).final
    growth = l2_norm(a - b) / l2_norm(eta)
    bound = math.exp((math.exp(T) - 1) * flux.dlambda_sup) * 1.01
    verdict("C4 Gronwall surrogate", growth <= bound, f"growth {growth:.3f} vs bound {bound:.3f}")


# 5 ----------------------------------------------------------------------------------


def test_c5_kinetic_identities(verdict):
    eps = 0.05
    traj = riemann_run(buckley_leverett(1.0), 512, 4.0, eps, eps**3, eps**0.125, 0.25, 0.05)
    lam = LambdaGrid(-1.2, 1.2, 256)
    cube = kinetic_function(traj, lam)
    worst = 0.0
    for k in range(len(traj.times)):
        for l in np.linspace(0.05, 1.2, 24):
            diff = lattice_truncation(cube, l, k).values - truncation(traj.states[k], l).values
            worst = max(worst, float(np.max(np.abs(diff))))
    ok = worst <= lam.spacing and cube.is_monotone()
    verdict("C5 kinetic identities", ok, f"max error {worst:.2e} vs λ-cell {lam.spacing:.2e}, monotone {cube.is_monotone()}")


# 6 ----------------------------------------------------------------------------------


def test_c6_defect_decay(verdict, decay_sweeps):
    parts = []
    ok = True
    for name, sweep in decay_sweeps.items():
        d = sweep.decay
        good = d.gamma1_decreasing and d.gamma2_decreasing and d.bounded(10.0)
        ok &= good
        parts.append(
            f"{name}: Γ1 ↓ {d.gamma1_decreasing}, Γ2 ↓ {d.gamma2_decreasing}, "
            f"Γ3 ratio {d.gamma3_ratio:.2f}, Γ4 ratio {d.gamma4_ratio:.2f}"
        )
    verdict("C6 defect decay", ok, "; ".join(parts))


# 7 ----------------------------------------------------------------------------------


def test_c7_regime_iii_convergence(verdict, convergence_sweep):
    result, elapsed = convergence_sweep
    l1 = result.column("l1_reference")
    ok = result.l1_strictly_decreasing() and l1[-1] < 0.5 * l1[0] and elapsed < 600
    verdict("C7 regime iii convergence", ok, "L1 " + ", ".join(f"{v:.3f}" for v in l1) + f" in {elapsed:.1f} s")


# 8 ----------------------------------------------------------------------------------


def test_c8_overshoot_dichotomy(verdict):
    scan = overshoot_scan()
    best = {}
    for r in scan.rows:
        if r["family"] == "capillary":
            best[r["S_L"]] = max(best.get(r["S_L"], 0.0), r["overshoot"])
    control = {S_L: scan.control_at(S_L)[-1]["overshoot"] for S_L in best}
    witnesses = [S_L for S_L in best if best[S_L] > 0.02 and control[S_L] < 0.005]
    peak, row = scan.capillary_max()
    detail = f"capillary max {peak:.3f} at τ={row['tau']}, S_L={row['S_L']}; controls at smallest ε {control}"
    verdict("C8 overshoot dichotomy", bool(witnesses), detail)


# 9 ----------------------------------------------------------------------------------


def test_c9_exact_riemann_oracle(verdict):
    cases = [(1.0, 1.0, 0.0), (2.0, 0.9, 0.1), (0.5, 1.0, 0.2), (1.0, 0.0, 1.0), (3.0, 0.2, 0.95)]
    worst = 0.0
    chords = True
    for A, S_L, S_R in cases:
        sol = bl_riemann_exact(A, S_L, S_R)
        worst = max(worst, sol.tangency_residual())
        chords &= sol.chord_condition(10)
    S_star = bl_riemann_exact(1.0, 1.0, 0.0).tangency
    ok = worst < 1e-10 and chords
    verdict("C9 exact Riemann oracle", ok, f"tangency residual {worst:.1e}, chords hold {chords}, S* = {S_star:.12f}")


# 10 ---------------------------------------------------------------------------------


def test_c10_determinism(verdict, convergence_sweep, tmp_path):
    again = run_sweep(CONVERGENCE_SCHEDULE, CONVERGENCE_SETTINGS, workers=2)
    a = emit_report(convergence_sweep[0], tmp_path / "a")["sweep"].read_bytes()
    b = emit_report(again, tmp_path / "b")["sweep"].read_bytes()
    verdict("C10 determinism", a == b, f"{len(a)} bytes, identical {a == b}")
