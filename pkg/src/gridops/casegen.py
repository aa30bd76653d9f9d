"""Deterministic synthetic case construction.

make_case builds an arbitrary-size grid for capacity testing: substations
on a rectangular grid, an HV mesh of lines, a step-down transformer with
load (and sometimes generation) per substation. education_case is the
small hand-tuned two-area system the shipped training scenarios use.
"""

from __future__ import annotations

import math

import numpy as np

from .model import (
    Area,
    Branch,
    BranchStatus,
    Bus,
    BusType,
    GenStatus,
    Generator,
    Load,
    NetworkCase,
    ShuntStatus,
    Substation,
    SwitchedShunt,
    _autofill_containment,
    validate_case,
)

HV_KV = 345.0
LV_KV = 13.8


def make_case(n_buses: int, seed: int = 0) -> NetworkCase:
    """Random-but-reproducible case with ~n_buses buses that solves flat-start.

    Half the buses are HV nodes meshed by lines, the other half LV nodes
    hanging off grounded-wye transformers; loading is kept light enough
    that Newton converges from flat start on any size.
    """
    if n_buses < 2:
        raise ValueError("need at least 2 buses")
    rng = np.random.default_rng(seed)
    n_sub = max(1, n_buses // 2)
    cols = max(1, int(math.sqrt(n_sub)))

    case = NetworkCase(base_mva=100.0)
    case.areas = [Area(id=1, name="Synthetic", frequency_bias_b=-max(10.0, n_sub / 2.0))]

    hv_of_sub = {}
    next_bus = 1
    for s in range(n_sub):
        row, col = divmod(s, cols)
        case.substations.append(Substation(
            id=s + 1, name=f"S{s + 1:04d}",
            latitude=28.0 + 0.12 * row, longitude=-99.0 + 0.12 * col,
            grounding_resistance_ohm=float(rng.uniform(0.2, 1.0)),
        ))
        hv = next_bus
        next_bus += 1
        hv_of_sub[s] = hv
        slack = s == 0
        case.buses.append(Bus(id=hv, name=f"HV{hv}", base_kv=HV_KV,
                              type=BusType.SLACK if slack else BusType.PQ,
                              substation_id=s + 1))

    lv_count = n_buses - n_sub
    branch_id = 1
    gen_id = 1
    load_id = 1
    shunt_id = 1
    total_load = 0.0
    gen_subs = []
    for s in range(min(lv_count, n_sub)):
        lv = next_bus
        next_bus += 1
        has_gen = s % 4 == 0
        case.buses.append(Bus(id=lv, name=f"LV{lv}", base_kv=LV_KV,
                              type=BusType.PV if has_gen else BusType.PQ,
                              substation_id=s + 1))
        case.branches.append(Branch(
            id=branch_id, from_bus=hv_of_sub[s], to_bus=lv,
            r=0.002, x=float(rng.uniform(0.04, 0.08)),
            tap_ratio=1.0, is_transformer=True,
            dc_resistance_ohm=float(rng.uniform(0.2, 0.8)),
            gic_k_factor=float(rng.uniform(0.6, 1.8)),
            mva_limit=120.0,
        ))
        branch_id += 1
        p_load = float(rng.uniform(4.0, 16.0))
        total_load += p_load
        case.loads.append(Load(id=load_id, bus=lv, p_nominal=p_load,
                               q_nominal=round(p_load * 0.28, 3)))
        load_id += 1
        if s % 6 == 3:
            case.shunts.append(SwitchedShunt(id=shunt_id, bus=lv, q_nominal=8.0,
                                             status=ShuntStatus.OFF))
            shunt_id += 1
        if has_gen:
            gen_subs.append((s, lv))

    # hv mesh: grid neighbours plus a few long chords
    for s in range(n_sub):
        row, col = divmod(s, cols)
        for (r2, c2) in ((row, col + 1), (row + 1, col)):
            t = r2 * cols + c2
            if c2 >= cols or t >= n_sub:
                continue
            x = float(rng.uniform(0.008, 0.03))
            case.branches.append(Branch(
                id=branch_id, from_bus=hv_of_sub[s], to_bus=hv_of_sub[t],
                r=x / 5.0, x=x, b_charging=float(rng.uniform(0.005, 0.02)),
                dc_resistance_ohm=float(rng.uniform(2.0, 12.0)),
                mva_limit=250.0,
            ))
            branch_id += 1
    for _ in range(max(1, n_sub // 20)):
        a, b = int(rng.integers(0, n_sub)), int(rng.integers(0, n_sub))
        if a == b:
            continue
        x = float(rng.uniform(0.02, 0.05))
        case.branches.append(Branch(
            id=branch_id, from_bus=hv_of_sub[a], to_bus=hv_of_sub[b],
            r=x / 5.0, x=x, b_charging=0.01,
            dc_resistance_ohm=float(rng.uniform(5.0, 25.0)), mva_limit=250.0,
        ))
        branch_id += 1

    # the distributed fleet covers the load; the slack unit only sees losses
    fleet_target = total_load * 0.98
    share = fleet_target / max(1, len(gen_subs))
    for s, lv in gen_subs:
        p_max = round(share * float(rng.uniform(1.35, 1.7)), 1)
        case.generators.append(Generator(
            id=gen_id, bus=lv, status=GenStatus.ONLINE,
            p_set=round(min(share, p_max * 0.85), 1), p_min=0.0, p_max=p_max,
            q_min=-round(p_max * 0.6, 1), q_max=round(p_max * 0.6, 1),
            v_setpoint=1.01,
            cost_a=float(rng.uniform(50, 200)), cost_b=float(rng.uniform(10, 40)),
            cost_c=float(rng.uniform(0.002, 0.02)),
            ramp_rate=max(5.0, p_max / 4.0),
        ))
        gen_id += 1
    slack_cap = max(100.0, total_load * 0.6)
    case.generators.append(Generator(
        id=gen_id, bus=hv_of_sub[0], status=GenStatus.ONLINE,
        p_set=0.0, p_min=0.0, p_max=round(slack_cap, 1),
        q_min=-round(slack_cap, 1), q_max=round(slack_cap, 1),
        v_setpoint=1.02, cost_a=100.0, cost_b=25.0, cost_c=0.005,
        ramp_rate=slack_cap / 2.0,
    ))

    _autofill_containment(case)
    errors = [f for f in validate_case(case) if f.severity == "error"]
    if errors:
        raise RuntimeError(f"generated case is invalid: {errors[:3]}")
    return case


def education_case() -> NetworkCase:
    """Two-area training system: a study area short on capacity plus a neighbour.

    Sized so the default dispatch leaves roughly 25% headroom at the
    13:00-peak profile shipped with the education scenario: utilization
    hits 100% about 200 wall-seconds in at 60x time.
    """
    case = NetworkCase(base_mva=100.0)
    case.areas = [
        Area(id=1, name="Coastal", scheduled_export=-70.0, frequency_bias_b=-22.0),
        Area(id=2, name="Inland", scheduled_export=70.0, frequency_bias_b=-35.0),
    ]
    subs = [
        # id, name, lat, lon, ground ohm, area
        (1, "Harbor", 28.60, -96.60, 0.4),
        (2, "Refinery", 28.95, -96.95, 0.5),
        (3, "Junction", 29.30, -96.40, 0.6),
        (4, "Prairie", 29.65, -96.90, 0.5),
        (5, "Mills", 29.10, -95.90, 0.45),
        (6, "Inland North", 30.25, -96.55, 0.55),
        (7, "Inland East", 30.05, -95.75, 0.5),
    ]
    for sid, name, lat, lon, rg in subs:
        case.substations.append(Substation(id=sid, name=name, latitude=lat,
                                           longitude=lon, grounding_resistance_ohm=rg))
    case.areas[0].substation_ids = [1, 2, 3, 4, 5]
    case.areas[1].substation_ids = [6, 7]

    def bus(i, kv, btype, sub, name):
        case.buses.append(Bus(id=i, name=name, base_kv=kv, type=btype, substation_id=sub))

    bus(1, HV_KV, BusType.PQ, 1, "Harbor 345")
    bus(2, LV_KV, BusType.PV, 1, "Harbor G1")
    bus(3, HV_KV, BusType.PQ, 2, "Refinery 345")
    bus(4, LV_KV, BusType.PV, 2, "Refinery G2")
    bus(5, HV_KV, BusType.PQ, 3, "Junction 345")
    bus(6, LV_KV, BusType.PQ, 3, "Junction load")
    bus(7, HV_KV, BusType.PQ, 4, "Prairie 345")
    bus(8, LV_KV, BusType.PV, 4, "Prairie G3")
    bus(9, HV_KV, BusType.PQ, 5, "Mills 345")
    bus(10, LV_KV, BusType.PQ, 5, "Mills load")
    bus(11, HV_KV, BusType.PQ, 6, "Inland North 345")
    bus(12, LV_KV, BusType.SLACK, 6, "Inland G4")
    bus(13, HV_KV, BusType.PQ, 7, "Inland East 345")

    def line(i, f, t, x, limit, dc):
        case.branches.append(Branch(id=i, from_bus=f, to_bus=t, r=x / 6.0, x=x,
                                    b_charging=0.02, mva_limit=limit,
                                    dc_resistance_ohm=dc))

    def xfmr(i, f, t, x, limit, k):
        case.branches.append(Branch(id=i, from_bus=f, to_bus=t, r=0.003, x=x,
                                    is_transformer=True, tap_ratio=1.0,
                                    mva_limit=limit, dc_resistance_ohm=0.35,
                                    gic_k_factor=k))

    line(1, 1, 3, 0.025, 180.0, 4.5)
    line(2, 1, 5, 0.030, 160.0, 5.5)
    line(3, 3, 5, 0.022, 180.0, 4.0)
    line(4, 3, 7, 0.028, 150.0, 5.0)
    line(5, 5, 7, 0.026, 150.0, 4.8)
    line(6, 5, 9, 0.024, 160.0, 4.2)
    line(7, 1, 9, 0.033, 140.0, 6.0)
    line(8, 7, 11, 0.020, 220.0, 7.5)   # tie: Coastal <-> Inland
    line(9, 9, 13, 0.027, 180.0, 8.0)   # tie
    line(10, 11, 13, 0.018, 220.0, 3.5)
    xfmr(11, 2, 1, 0.055, 150.0, 1.2)
    xfmr(12, 4, 3, 0.060, 120.0, 1.0)
    xfmr(13, 8, 7, 0.058, 110.0, 1.5)
    xfmr(14, 12, 11, 0.050, 260.0, 0.8)
    xfmr(15, 6, 5, 0.065, 90.0, 1.1)
    xfmr(16, 10, 9, 0.062, 90.0, 1.3)

    def gen(i, b, status, p_set, p_max, cost, ramp):
        a, bb, c = cost
        case.generators.append(Generator(
            id=i, bus=b, status=status, p_set=p_set, p_min=0.0, p_max=p_max,
            q_min=-p_max * 0.55, q_max=p_max * 0.55, v_setpoint=1.02,
            cost_a=a, cost_b=bb, cost_c=c, ramp_rate=ramp,
        ))

    gen(1, 2, GenStatus.ONLINE, 95.0, 140.0, (180.0, 16.0, 0.012), 30.0)
    gen(2, 4, GenStatus.ONLINE, 70.0, 110.0, (140.0, 22.0, 0.018), 25.0)
    gen(3, 8, GenStatus.OFFLINE, 0.0, 90.0, (120.0, 30.0, 0.020), 40.0)
    gen(4, 12, GenStatus.ONLINE, 130.0, 320.0, (220.0, 19.0, 0.008), 60.0)

    def load(i, b, p, q):
        case.loads.append(Load(id=i, bus=b, p_nominal=p, q_nominal=q))

    load(1, 6, 68.0, 22.0)
    load(2, 10, 62.0, 20.0)
    load(3, 1, 40.0, 13.0)
    load(4, 3, 36.0, 12.0)
    load(5, 7, 30.0, 10.0)
    load(6, 13, 55.0, 16.0)

    case.shunts.append(SwitchedShunt(id=1, bus=5, q_nominal=25.0, status=ShuntStatus.OFF))
    case.shunts.append(SwitchedShunt(id=2, bus=9, q_nominal=25.0, status=ShuntStatus.OFF))
    case.shunts.append(SwitchedShunt(id=3, bus=7, q_nominal=20.0, status=ShuntStatus.OFF))

    _autofill_containment(case)
    errors = [f for f in validate_case(case) if f.severity == "error"]
    if errors:
        raise RuntimeError(f"education case is invalid: {errors}")
    return case
