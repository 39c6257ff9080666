"""
Convergence to the entropy solution
===================================

An ε-sweep with δ = ε³ and n = ε^(1/8).  Each regularized solution is
compared in L¹ with a fine Godunov reference for the plain conservation law,
and the sweep is written out as CSV next to a JSON manifest.
"""

import tempfile

from dyncap import ScalingSchedule, SweepSettings, emit_report, run_sweep, validate_schedule

schedule = ScalingSchedule(3.0, 0.125, regime="iii", epsilon_list=(0.1, 0.05, 0.025, 0.0125))
verdict = validate_schedule(schedule)
print("regime", verdict.regime, "margins", verdict.margins)

settings = SweepSettings(
    flux={"kind": "buckley_leverett", "A": 1.0},
    u0={"kind": "riemann", "S_L": 1.0, "S_R": 0.0, "x0": -0.5},
    T=0.5,
    N=1024,
    L=2.0,
    reference_cells=4096,
    window=(-1.2, 1.6),
    kinetic=False,
    overshoot_S_L=1.0,
)
result = run_sweep(schedule, settings)

for rec in result.records:
    print(f"ε = {rec['eps']:<7} L¹ distance {rec['l1_reference']:.4f}   audit {'ok' if rec['audit_pass'] else 'FAILED'}")
print("strictly decreasing:", result.l1_strictly_decreasing())

out = tempfile.mkdtemp(prefix="sweep_")
paths = emit_report(result, out)
print("report written to", paths["sweep"])
