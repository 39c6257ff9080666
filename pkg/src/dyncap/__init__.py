"""Pseudo-parabolic regularizations of conservation laws with discontinuous flux.

The package solves

    ∂t u + div f_ε(x, u) = ε Δu + δ ∂t Δu

on a periodic box, audits the energy estimates that control it, probes the
kinetic defect measures, and measures the limit ε → 0 against an entropy
reference.
"""

from .bench import (
    SCAN_COLUMNS,
    SCHEMA_VERSION,
    SWEEP_COLUMNS,
    OvershootScan,
    ScalingSchedule,
    ScheduleVerdict,
    SweepResult,
    SweepSettings,
    emit_report,
    initial_profile,
    overshoot_metric,
    overshoot_scan,
    run_sweep,
    smoothed_riemann,
    validate_schedule,
)
from .energy import (
    EnergyReport,
    audit_table,
    energy_identity_residual,
    initial_condition_constant,
    verify_estimates,
    verify_initial_condition,
)
from .errors import DyncapError
from .flux import (
    MollifiedFlux,
    Mollifier,
    buckley_leverett,
    check_nondegeneracy,
    flux_from_spec,
    linear_flux,
    load_flux_config,
    mollify,
    mollify_field,
    table_flux,
    two_rock_flux,
    zero_flux,
)
from .grid import (
    Grid,
    RealField,
    SpectralField,
    forward_transform,
    gradient,
    inverse_transform,
    l2_norm,
    laplacian,
    read_snapshot,
    write_snapshot,
)
from .kinetic import (
    LambdaGrid,
    compactness_probe,
    defect_bundle,
    defect_decay_study,
    kinetic_function,
    lattice_truncation,
    truncation,
    velocity_average,
)
from .reference import (
    FVState,
    bl_riemann_exact,
    cell_averages,
    godunov_solve,
    l1_distance,
    rankine_hugoniot_speed,
)
from .solver import SolverConfig, Trajectory, solve, stability_diagnostic
from .store import load_trajectory, save_trajectory

__version__ = "0.1.0"
