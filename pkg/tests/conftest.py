import numpy as np
import pytest

from gridops.model import (
    _autofill_containment,
    Area,
    Branch,
    Bus,
    BusType,
    Generator,
    Load,
    NetworkCase,
    Substation,
    SwitchedShunt,
)


def make_two_bus_case() -> NetworkCase:
    """Slack at 1.0 pu feeding a 0.5+j0.2 pu load over a pure x=0.1 line."""
    case = NetworkCase(
        base_mva=100.0,
        buses=[
            Bus(id=1, base_kv=138.0, type=BusType.SLACK, substation_id=1),
            Bus(id=2, base_kv=138.0, type=BusType.PQ, substation_id=2),
        ],
        branches=[
            Branch(id=1, from_bus=1, to_bus=2, r=0.0, x=0.1, dc_resistance_ohm=3.0, mva_limit=200.0)
        ],
        generators=[
            Generator(id=1, bus=1, p_set=0.0, p_min=-1000.0, p_max=1000.0, q_min=-1000.0,
                      q_max=1000.0, v_setpoint=1.0)
        ],
        loads=[Load(id=1, bus=2, p_nominal=50.0, q_nominal=20.0)],
        substations=[
            Substation(id=1, latitude=30.0, longitude=-97.0),
            Substation(id=2, latitude=30.0, longitude=-96.0),
        ],
        areas=[Area(id=1, substation_ids=[1, 2])],
    )
    _autofill_containment(case)
    return case


@pytest.fixture
def two_bus_case() -> NetworkCase:
    return make_two_bus_case()


def make_gic_fixture_case() -> NetworkCase:
    """Two substations, bonded gsu transformers, one 9 ohm/phase line.

    The dc loop is 0.5 + 9/3 + 0.5 = 4 ohm, so a 100 V line EMF drives
    25 A through each substation ground, with opposite signs.
    """
    case = NetworkCase(
        base_mva=100.0,
        buses=[
            Bus(id=1, base_kv=345.0, type=BusType.SLACK, substation_id=1),
            Bus(id=2, base_kv=13.8, type=BusType.PV, substation_id=1),
            Bus(id=3, base_kv=345.0, type=BusType.PQ, substation_id=2),
            Bus(id=4, base_kv=13.8, type=BusType.PQ, substation_id=2),
        ],
        branches=[
            Branch(id=1, from_bus=2, to_bus=1, r=0.001, x=0.05, tap_ratio=1.0,
                   is_transformer=True, dc_resistance_ohm=0.0, gic_k_factor=1.0, mva_limit=500.0),
            Branch(id=2, from_bus=1, to_bus=3, r=0.01, x=0.08, dc_resistance_ohm=9.0, mva_limit=500.0),
            Branch(id=3, from_bus=4, to_bus=3, r=0.001, x=0.05, tap_ratio=1.0,
                   is_transformer=True, dc_resistance_ohm=0.0, gic_k_factor=1.8, mva_limit=500.0),
        ],
        generators=[
            Generator(id=1, bus=1, p_set=0.0, p_min=-500.0, p_max=500.0, q_min=-300.0, q_max=300.0),
            Generator(id=2, bus=2, p_set=30.0, p_max=100.0, q_min=-80.0, q_max=80.0),
        ],
        loads=[Load(id=1, bus=4, p_nominal=25.0, q_nominal=8.0)],
        substations=[
            Substation(id=1, name="West", latitude=30.0, longitude=-97.0,
                       grounding_resistance_ohm=0.5),
            Substation(id=2, name="East", latitude=30.0, longitude=-96.0,
                       grounding_resistance_ohm=0.5),
        ],
        areas=[Area(id=1, substation_ids=[1, 2])],
    )
    _autofill_containment(case)
    return case


@pytest.fixture
def gic_case() -> NetworkCase:
    return make_gic_fixture_case()


def make_scenario_text(case: NetworkCase, **overrides) -> str:
    """Scenario document with the case embedded, for headless session tests."""
    import json

    from gridops.model import case_to_json

    doc = {
        "name": "test-scenario",
        "case": json.loads(case_to_json(case)),
        "sim_start": "10:00:00",
        "sim_span": 40.0,
        "timescale": 60.0,
        "dt_sim": 2.0,
        "load_profile": [[0.0, 1.0]],
        "tokens": {
            "t-ins": "instructor",
            "t-gen": "generation",
            "t-vs": "voltage_support",
            "t-ov": "overview",
        },
        "beta_sys": 100.0,
        "rng_seed": 7,
    }
    doc.update(overrides)
    return json.dumps(doc)
