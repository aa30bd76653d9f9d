"""Solving the AC power flow on a small case, with flows and violations.

Builds the two-bus teaching network, solves it from a flat start, and
walks through what the solution contains: voltages, branch flows, losses
and limit checks. Run: python3 demos/01_power_flow.py
"""

import numpy as np

from gridops.model import (
    Area, Branch, Bus, BusType, Generator, Load, NetworkCase, Substation,
    build_admittance, validate_case,
)
from gridops.powerflow import (
    PowerFlowOptions, compute_branch_flows, detect_violations,
    distribute_generation, enforce_q_limits, solve_power_flow,
)

case = NetworkCase(
    base_mva=100.0,
    buses=[
        Bus(id=1, name="Plant", base_kv=138.0, type=BusType.SLACK, substation_id=1),
        Bus(id=2, name="City", base_kv=138.0, type=BusType.PQ, substation_id=2),
    ],
    branches=[Branch(id=1, from_bus=1, to_bus=2, r=0.01, x=0.1, mva_limit=80.0,
                     dc_resistance_ohm=3.0)],
    generators=[Generator(id=1, bus=1, p_max=200.0, q_min=-100.0, q_max=100.0)],
    loads=[Load(id=1, bus=2, p_nominal=50.0, q_nominal=20.0)],
    substations=[Substation(id=1, latitude=30.0, longitude=-97.0),
                 Substation(id=2, latitude=30.0, longitude=-96.2)],
    areas=[Area(id=1, substation_ids=[1, 2])],
)

print("validation findings:", validate_case(case) or "none")
print("admittance matrix:\n", np.round(build_admittance(case).toarray(), 2))

sol = solve_power_flow(case, options=PowerFlowOptions(flat_start=True))
sol = enforce_q_limits(case, sol)
sol = compute_branch_flows(case, sol)
sol = distribute_generation(case, sol)

print(f"\nconverged in {sol.iterations} iterations, mismatch {sol.max_mismatch:.2e} pu")
for bus, vm, va in zip(case.buses, sol.vm, sol.va):
    print(f"  {bus.name:8s} V = {vm:.4f} pu at {np.degrees(va):7.3f} deg")
print(f"  line flow {sol.p_from_mw[0]:.2f} MW / {sol.q_from_mvar[0]:.2f} Mvar, "
      f"loading {sol.loading_pct[0]:.1f}%")
print(f"  losses {sol.p_from_mw[0] + sol.p_to_mw[0]:.3f} MW")

violations = detect_violations(case, sol)
print("violations:", "none" if violations.is_empty() else violations)

# push the same network three times harder and watch the voltage sag
case.loads[0].p_nominal *= 3.2
case.loads[0].q_nominal *= 3.2
sol2 = compute_branch_flows(case, enforce_q_limits(case, solve_power_flow(case)))
print(f"\nat 3.2x load: V2 = {sol2.vm[1]:.4f} pu, loading {sol2.loading_pct[0]:.0f}%")
print("violations now:")
for entry in detect_violations(case, sol2).bus_voltage:
    print("  bus", entry[0], f"{entry[1]:.4f} pu", entry[2])
for entry in detect_violations(case, sol2).branch_overload:
    print("  branch", entry[0], f"{entry[1]:.0f}% loaded")
