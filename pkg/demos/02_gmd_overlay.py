"""Geomagnetic disturbance mechanics: dc network, neutral currents, heating.

Walks the GIC chain end to end on the two-substation fixture: a uniform
geoelectric field induces an EMF along the line, drives quasi-dc current
through the transformer neutrals, produces extra reactive losses, and
heats the windings. Run: python3 demos/02_gmd_overlay.py
"""

import numpy as np

from gridops.gmd import (
    FieldEvent, build_dc_network, gic_reactive_losses, gmd_event_field,
    induced_line_voltages, sample_field_contour, solve_gic, thermal_step,
)
from gridops.casegen import education_case

case = education_case()
net = build_dc_network(case)
print(f"dc network: {net.n_nodes} nodes, {len(net.lines)} line paths, "
      f"{len(net.windings)} windings")

# a storm field pointing north-east at 4 V/km
emfs = induced_line_voltages(case, e_north=2.8, e_east=2.8)
print("\ninduced EMFs (V):")
for bid, emf in sorted(emfs.items()):
    if abs(emf) > 1e-9:
        print(f"  branch {bid:2d}: {emf:8.1f}")

sol = solve_gic(net, emfs)
print("\nneutral currents (A, into ground positive):")
for sid, amps in sorted(sol.neutral_amps.items()):
    name = case.substation_by_id(sid).name
    print(f"  {name:14s} {amps:9.2f}")
print("KCL check, sum =", f"{sum(sol.neutral_amps.values()):.2e} A")

losses = gic_reactive_losses(sol, case, vm=np.ones(len(case.buses)))
print("\ntransformer reactive losses (Mvar):",
      {k: round(v, 1) for k, v in losses.items()})

# heating: one transformer at 60 A settles toward eta * I = 120 C
for minute in (1, 5, 10, 30):
    theta = 0.0
    for _ in range(minute * 2):
        theta = thermal_step(theta, 60.0, 30.0, eta=2.0, tau=600.0)
    print(f"hot-spot rise after {minute:2d} min at 60 A: {theta:6.1f} C")

# the storm waveform and its contour snapshot for the map
event = FieldEvent(onset=1680.0, duration=600.0,
                   waveform=[(0.0, 0.0, 0.0), (300.0, 4.2, 3.0), (600.0, 4.2, 3.0)])
for t in (1600.0, 1680.0, 1830.0, 1980.0, 2280.0, 2300.0):
    print(f"field at t={t:6.0f}:", gmd_event_field(t, event))

samples = [(s.latitude, s.longitude, abs(hash(s.id)) % 4 + 1.0) for s in case.substations]
grid = sample_field_contour(samples, rows=6, cols=8,
                            bbox=(28.4, -97.2, 30.5, -95.5))
print("\ncontour grid (|E| V/km):")
for row in grid:
    print("  " + " ".join(f"{v:4.1f}" for v in row))
