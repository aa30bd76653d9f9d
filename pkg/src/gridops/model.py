"""Static network data model: case schema, validation and nodal admittance.

The case is immutable after load; everything that changes during a run
(breaker states, setpoints, taps) lives in the simulation state overlay
and is passed separately to :func:`build_admittance`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional

import numpy as np
from scipy import sparse


class CaseError(Exception):
    """Base error for case loading problems."""


class SchemaError(CaseError):
    """Document is structurally wrong (missing field, bad type). Carries a path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class IntegrityError(CaseError):
    """Referential or electrical integrity violated (dangling bus, no slack)."""


class BusType(str, Enum):
    SLACK = "slack"
    PV = "pv"
    PQ = "pq"


class BranchStatus(str, Enum):
    CLOSED = "closed"
    OPEN = "open"


class GenStatus(str, Enum):
    ONLINE = "online"
    OFFLINE = "offline"


class LoadStatus(str, Enum):
    CLOSED = "closed"
    OPEN = "open"


class ShuntStatus(str, Enum):
    ON = "on"
    OFF = "off"


@dataclass
class Bus:
    id: int
    name: str = ""
    base_kv: float = 138.0
    type: BusType = BusType.PQ
    v_min: float = 0.95
    v_max: float = 1.05
    substation_id: int = 0


@dataclass
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r: float = 0.0
    x: float = 0.1
    b_charging: float = 0.0
    tap_ratio: float = 1.0
    tap_min: float = 0.9
    tap_max: float = 1.1
    tap_step: float = 0.00625
    mva_limit: float = 9999.0
    dc_resistance_ohm: float = 1.0
    is_transformer: bool = False
    gic_k_factor: float = 1.0
    status: BranchStatus = BranchStatus.CLOSED


@dataclass
class Generator:
    id: int
    bus: int
    status: GenStatus = GenStatus.ONLINE
    p_set: float = 0.0
    p_min: float = 0.0
    p_max: float = 100.0
    q_min: float = -50.0
    q_max: float = 50.0
    v_setpoint: float = 1.0
    cost_a: float = 0.0
    cost_b: float = 0.0
    cost_c: float = 0.0
    ramp_rate: float = 50.0


@dataclass
class Load:
    id: int
    bus: int
    p_nominal: float = 0.0
    q_nominal: float = 0.0
    served_fraction: float = 1.0
    status: LoadStatus = LoadStatus.CLOSED


@dataclass
class SwitchedShunt:
    id: int
    bus: int
    q_nominal: float = 0.0
    status: ShuntStatus = ShuntStatus.OFF


@dataclass
class Substation:
    id: int
    name: str = ""
    latitude: float = 0.0
    longitude: float = 0.0
    grounding_resistance_ohm: float = 0.5
    bus_ids: list[int] = field(default_factory=list)


@dataclass
class Area:
    id: int
    name: str = ""
    scheduled_export: float = 0.0
    frequency_bias_b: float = -10.0
    substation_ids: list[int] = field(default_factory=list)


@dataclass
class NetworkCase:
    base_mva: float = 100.0
    buses: list[Bus] = field(default_factory=list)
    branches: list[Branch] = field(default_factory=list)
    generators: list[Generator] = field(default_factory=list)
    loads: list[Load] = field(default_factory=list)
    shunts: list[SwitchedShunt] = field(default_factory=list)
    substations: list[Substation] = field(default_factory=list)
    areas: list[Area] = field(default_factory=list)

    def bus_index(self) -> dict[int, int]:
        """Bus id -> position in self.buses."""
        return {b.id: i for i, b in enumerate(self.buses)}

    def bus_by_id(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index()[bus_id]]

    def substation_by_id(self, sub_id: int) -> Substation:
        for s in self.substations:
            if s.id == sub_id:
                return s
        raise KeyError(sub_id)

    def element(self, kind: str, elem_id: int):
        """Look up an element by collection name and id, or None."""
        coll = {
            "bus": self.buses,
            "branch": self.branches,
            "generator": self.generators,
            "load": self.loads,
            "shunt": self.shunts,
            "substation": self.substations,
            "area": self.areas,
        }[kind]
        for e in coll:
            if e.id == elem_id:
                return e
        return None


@dataclass
class Finding:
    """One validation finding. severity is 'error' or 'warning'."""

    severity: str
    element: str
    message: str

    def __str__(self) -> str:
        return f"[{self.severity}] {self.element}: {self.message}"


def _req(doc: dict, key: str, path: str):
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return doc[key]


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected number, got {type(value).__name__}")
    return float(value)


def _intval(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"expected integer, got {type(value).__name__}")
    return value


def _enum(value, enum_cls, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise SchemaError(path, f"expected one of [{allowed}], got {value!r}") from None


def _parse_bus(doc: dict, path: str) -> Bus:
    return Bus(
        id=_intval(_req(doc, "id", path), f"{path}.id"),
        name=str(doc.get("name", "")),
        base_kv=_num(_req(doc, "base_kv", path), f"{path}.base_kv"),
        type=_enum(_req(doc, "type", path), BusType, f"{path}.type"),
        v_min=_num(doc.get("v_min", 0.95), f"{path}.v_min"),
        v_max=_num(doc.get("v_max", 1.05), f"{path}.v_max"),
        substation_id=_intval(_req(doc, "substation_id", path), f"{path}.substation_id"),
    )


def _parse_branch(doc: dict, path: str) -> Branch:
    return Branch(
        id=_intval(_req(doc, "id", path), f"{path}.id"),
        from_bus=_intval(_req(doc, "from_bus", path), f"{path}.from_bus"),
        to_bus=_intval(_req(doc, "to_bus", path), f"{path}.to_bus"),
        r=_num(doc.get("r", 0.0), f"{path}.r"),
        x=_num(_req(doc, "x", path), f"{path}.x"),
        b_charging=_num(doc.get("b_charging", 0.0), f"{path}.b_charging"),
        tap_ratio=_num(doc.get("tap_ratio", 1.0), f"{path}.tap_ratio"),
        tap_min=_num(doc.get("tap_min", 0.9), f"{path}.tap_min"),
        tap_max=_num(doc.get("tap_max", 1.1), f"{path}.tap_max"),
        tap_step=_num(doc.get("tap_step", 0.00625), f"{path}.tap_step"),
        mva_limit=_num(doc.get("mva_limit", 9999.0), f"{path}.mva_limit"),
        dc_resistance_ohm=_num(doc.get("dc_resistance_ohm", 1.0), f"{path}.dc_resistance_ohm"),
        is_transformer=bool(doc.get("is_transformer", False)),
        gic_k_factor=_num(doc.get("gic_k_factor", 1.0), f"{path}.gic_k_factor"),
        status=_enum(doc.get("status", "closed"), BranchStatus, f"{path}.status"),
    )


def _parse_generator(doc: dict, path: str) -> Generator:
    return Generator(
        id=_intval(_req(doc, "id", path), f"{path}.id"),
        bus=_intval(_req(doc, "bus", path), f"{path}.bus"),
        status=_enum(doc.get("status", "online"), GenStatus, f"{path}.status"),
        p_set=_num(doc.get("p_set", 0.0), f"{path}.p_set"),
        p_min=_num(doc.get("p_min", 0.0), f"{path}.p_min"),
        p_max=_num(_req(doc, "p_max", path), f"{path}.p_max"),
        q_min=_num(doc.get("q_min", -9999.0), f"{path}.q_min"),
        q_max=_num(doc.get("q_max", 9999.0), f"{path}.q_max"),
        v_setpoint=_num(doc.get("v_setpoint", 1.0), f"{path}.v_setpoint"),
        cost_a=_num(doc.get("cost_a", 0.0), f"{path}.cost_a"),
        cost_b=_num(doc.get("cost_b", 0.0), f"{path}.cost_b"),
        cost_c=_num(doc.get("cost_c", 0.0), f"{path}.cost_c"),
        ramp_rate=_num(doc.get("ramp_rate", 50.0), f"{path}.ramp_rate"),
    )


def _parse_load(doc: dict, path: str) -> Load:
    return Load(
        id=_intval(_req(doc, "id", path), f"{path}.id"),
        bus=_intval(_req(doc, "bus", path), f"{path}.bus"),
        p_nominal=_num(doc.get("p_nominal", 0.0), f"{path}.p_nominal"),
        q_nominal=_num(doc.get("q_nominal", 0.0), f"{path}.q_nominal"),
        served_fraction=_num(doc.get("served_fraction", 1.0), f"{path}.served_fraction"),
        status=_enum(doc.get("status", "closed"), LoadStatus, f"{path}.status"),
    )


def _parse_shunt(doc: dict, path: str) -> SwitchedShunt:
    return SwitchedShunt(
        id=_intval(_req(doc, "id", path), f"{path}.id"),
        bus=_intval(_req(doc, "bus", path), f"{path}.bus"),
        q_nominal=_num(doc.get("q_nominal", 0.0), f"{path}.q_nominal"),
        status=_enum(doc.get("status", "off"), ShuntStatus, f"{path}.status"),
    )


def _parse_substation(doc: dict, path: str) -> Substation:
    return Substation(
        id=_intval(_req(doc, "id", path), f"{path}.id"),
        name=str(doc.get("name", "")),
        latitude=_num(doc.get("latitude", 0.0), f"{path}.latitude"),
        longitude=_num(doc.get("longitude", 0.0), f"{path}.longitude"),
        grounding_resistance_ohm=_num(
            doc.get("grounding_resistance_ohm", 0.5), f"{path}.grounding_resistance_ohm"
        ),
        bus_ids=list(doc.get("bus_ids", [])),
    )


def _parse_area(doc: dict, path: str) -> Area:
    return Area(
        id=_intval(_req(doc, "id", path), f"{path}.id"),
        name=str(doc.get("name", "")),
        scheduled_export=_num(doc.get("scheduled_export", 0.0), f"{path}.scheduled_export"),
        frequency_bias_b=_num(doc.get("frequency_bias_b", -10.0), f"{path}.frequency_bias_b"),
        substation_ids=list(doc.get("substation_ids", [])),
    )


_SECTION_PARSERS = {
    "buses": _parse_bus,
    "branches": _parse_branch,
    "generators": _parse_generator,
    "loads": _parse_load,
    "shunts": _parse_shunt,
    "substations": _parse_substation,
    "areas": _parse_area,
}


def parse_case_json(text: str) -> NetworkCase:
    """Parse the native case document and enforce all integrity invariants.

    Raises SchemaError for structural problems (with a path into the
    document) and IntegrityError when cross references or electrical
    invariants fail.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise SchemaError("$", "top level must be an object")

    case = NetworkCase(base_mva=_num(_req(doc, "base_mva", "$"), "$.base_mva"))
    for key, parser in _SECTION_PARSERS.items():
        rows = doc.get(key, [])
        if not isinstance(rows, list):
            raise SchemaError(f"$.{key}", "expected a list")
        parsed = []
        for i, row in enumerate(rows):
            if not isinstance(row, dict):
                raise SchemaError(f"$.{key}[{i}]", "expected an object")
            parsed.append(parser(row, f"$.{key}[{i}]"))
        setattr(case, _SECTION_ATTRS[key], parsed)

    _autofill_containment(case)
    findings = validate_case(case)
    errors = [f for f in findings if f.severity == "error"]
    if errors:
        raise IntegrityError("; ".join(str(f) for f in errors))
    return case


_SECTION_ATTRS = {
    "buses": "buses",
    "branches": "branches",
    "generators": "generators",
    "loads": "loads",
    "shunts": "shunts",
    "substations": "substations",
    "areas": "areas",
}


def _autofill_containment(case: NetworkCase) -> None:
    """Fill substation.bus_ids and area.substation_ids from the bus records."""
    by_sub: dict[int, list[int]] = {}
    for b in case.buses:
        by_sub.setdefault(b.substation_id, []).append(b.id)
    for s in case.substations:
        s.bus_ids = sorted(by_sub.get(s.id, []))
    # substations not claimed by any area get attached to the first area
    claimed = {sid for a in case.areas for sid in a.substation_ids}
    if case.areas:
        default = case.areas[0]
        for s in case.substations:
            if s.id not in claimed:
                default.substation_ids.append(s.id)
        for a in case.areas:
            a.substation_ids = sorted(set(a.substation_ids))


def case_to_json(case: NetworkCase, indent: Optional[int] = None) -> str:
    """Serialize a case back to the native document. Inverse of parse_case_json."""

    def strip(obj):
        if isinstance(obj, Enum):
            return obj.value
        if isinstance(obj, dict):
            return {k: strip(v) for k, v in obj.items()}
        if isinstance(obj, list):
            return [strip(v) for v in obj]
        return obj

    doc = {
        "base_mva": case.base_mva,
        "buses": [strip(asdict(b)) for b in case.buses],
        "branches": [strip(asdict(b)) for b in case.branches],
        "generators": [strip(asdict(g)) for g in case.generators],
        "loads": [strip(asdict(l)) for l in case.loads],
        "shunts": [strip(asdict(s)) for s in case.shunts],
        "substations": [strip(asdict(s)) for s in case.substations],
        "areas": [strip(asdict(a)) for a in case.areas],
    }
    return json.dumps(doc, indent=indent, sort_keys=True)


def islands(case: NetworkCase, branch_closed: Optional[np.ndarray] = None) -> list[set[int]]:
    """Connected components over closed branches, as sets of bus ids."""
    parent = {b.id: b.id for b in case.buses}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k, br in enumerate(case.branches):
        closed = br.status == BranchStatus.CLOSED if branch_closed is None else bool(branch_closed[k])
        if closed and br.from_bus in parent and br.to_bus in parent:
            ra, rb = find(br.from_bus), find(br.to_bus)
            if ra != rb:
                parent[ra] = rb
    groups: dict[int, set[int]] = {}
    for b in case.buses:
        groups.setdefault(find(b.id), set()).add(b.id)
    return list(groups.values())


def validate_case(case: NetworkCase) -> list[Finding]:
    """Check every invariant; returns findings (empty iff the case is sound)."""
    out: list[Finding] = []
    err = lambda el, msg: out.append(Finding("error", el, msg))
    warn = lambda el, msg: out.append(Finding("warning", el, msg))

    bus_ids = [b.id for b in case.buses]
    bus_set = set(bus_ids)
    if len(bus_ids) != len(bus_set):
        dupes = sorted({i for i in bus_ids if bus_ids.count(i) > 1})
        err("buses", f"duplicate bus ids {dupes}")
    if case.base_mva <= 0:
        err("case", "base_mva must be positive")

    sub_ids = {s.id for s in case.substations}
    for b in case.buses:
        if not (0 < b.v_min < b.v_max):
            err(f"bus {b.id}", f"invalid voltage band [{b.v_min}, {b.v_max}]")
        if b.base_kv <= 0:
            err(f"bus {b.id}", "base_kv must be positive")
        if b.substation_id not in sub_ids:
            err(f"bus {b.id}", f"references missing substation {b.substation_id}")

    seen_branch = set()
    for br in case.branches:
        if br.id in seen_branch:
            err(f"branch {br.id}", "duplicate branch id")
        seen_branch.add(br.id)
        for end, name in ((br.from_bus, "from_bus"), (br.to_bus, "to_bus")):
            if end not in bus_set:
                err(f"branch {br.id}", f"{name} references missing bus {end}")
        if br.x == 0:
            err(f"branch {br.id}", "zero reactance (x = 0) is not representable")
        if br.r < 0:
            err(f"branch {br.id}", "negative resistance")
        if br.mva_limit <= 0:
            err(f"branch {br.id}", "mva_limit must be positive")
        if not (br.tap_min <= br.tap_ratio <= br.tap_max):
            err(f"branch {br.id}", f"tap_ratio {br.tap_ratio} outside [{br.tap_min}, {br.tap_max}]")
        if br.is_transformer and br.gic_k_factor < 0:
            err(f"branch {br.id}", "gic_k_factor must be non-negative")
        if br.dc_resistance_ohm < 0:
            err(f"branch {br.id}", "dc_resistance_ohm must be non-negative")

    seen_gen = set()
    for g in case.generators:
        if g.id in seen_gen:
            err(f"generator {g.id}", "duplicate generator id")
        seen_gen.add(g.id)
        if g.bus not in bus_set:
            err(f"generator {g.id}", f"references missing bus {g.bus}")
        if g.q_min >= g.q_max:
            err(f"generator {g.id}", f"degenerate Q range [{g.q_min}, {g.q_max}]")
        if g.status == GenStatus.ONLINE and not (g.p_min <= g.p_set <= g.p_max):
            err(f"generator {g.id}", f"p_set {g.p_set} outside [{g.p_min}, {g.p_max}]")
        if g.ramp_rate <= 0:
            err(f"generator {g.id}", "ramp_rate must be positive")

    for l in case.loads:
        if l.bus not in bus_set:
            err(f"load {l.id}", f"references missing bus {l.bus}")
        if not (0.0 <= l.served_fraction <= 1.0):
            err(f"load {l.id}", f"served_fraction {l.served_fraction} outside [0, 1]")

    for s in case.shunts:
        if s.bus not in bus_set:
            err(f"shunt {s.id}", f"references missing bus {s.bus}")

    for s in case.substations:
        if abs(s.latitude) > 90 or abs(s.longitude) > 180:
            err(f"substation {s.id}", "coordinates out of range")
        if s.grounding_resistance_ohm <= 0:
            err(f"substation {s.id}", "grounding_resistance_ohm must be positive")

    area_ids = {a.id for a in case.areas}
    for a in case.areas:
        if a.frequency_bias_b >= 0:
            err(f"area {a.id}", "frequency_bias_b must be negative")
    sub_to_area: dict[int, int] = {}
    for a in case.areas:
        for sid in a.substation_ids:
            if sid in sub_to_area:
                err(f"substation {sid}", f"claimed by areas {sub_to_area[sid]} and {a.id}")
            sub_to_area[sid] = a.id
    if case.areas:
        for s in case.substations:
            if s.id not in sub_to_area:
                err(f"substation {s.id}", "belongs to no area")
    elif case.substations:
        err("areas", "case has substations but no areas")

    # slack accounting per island, at as-loaded breaker states
    if not any(True for _ in case.buses):
        err("buses", "case has no buses")
    else:
        online_gen_buses = {g.bus for g in case.generators if g.status == GenStatus.ONLINE}
        for isl in islands(case):
            slacks = [b for b in case.buses if b.id in isl and b.type == BusType.SLACK]
            if len(slacks) == 0:
                err("case", f"island containing bus {min(isl)} has no slack bus")
            elif len(slacks) > 1:
                err("case", f"multiple slack buses {sorted(b.id for b in slacks)} in one island")
            for s in slacks:
                if s.id not in online_gen_buses:
                    warn(f"bus {s.id}", "slack bus has no online generator")

    return out


def build_admittance(
    case: NetworkCase,
    branch_closed: Optional[np.ndarray] = None,
    taps: Optional[np.ndarray] = None,
    shunt_on: Optional[np.ndarray] = None,
    shunt_q: Optional[np.ndarray] = None,
) -> sparse.csr_matrix:
    """Complex nodal admittance matrix (per unit, bus order = case.buses).

    Pi model per branch with off-nominal tap on the from side:
    Yff = (ys + jb/2)/t^2, Yft = Ytf = -ys/t, Ytt = ys + jb/2.
    Open branches contribute nothing. Switched shunts that are on add
    j*q_nominal/base_mva to their bus diagonal.

    The overlay arrays override the case's own statuses/taps when given.
    """
    n = len(case.buses)
    idx = case.bus_index()
    rows, cols, vals = [], [], []
    for k, br in enumerate(case.branches):
        closed = br.status == BranchStatus.CLOSED if branch_closed is None else bool(branch_closed[k])
        if not closed:
            continue
        t = br.tap_ratio if taps is None else float(taps[k])
        ys = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b_charging
        f, to = idx[br.from_bus], idx[br.to_bus]
        rows += [f, to, f, to]
        cols += [f, to, to, f]
        vals += [(ys + ysh) / (t * t), ys + ysh, -ys / t, -ys / t]
    for j, sh in enumerate(case.shunts):
        on = sh.status == ShuntStatus.ON if shunt_on is None else bool(shunt_on[j])
        if not on:
            continue
        q = sh.q_nominal if shunt_q is None else float(shunt_q[j])
        rows.append(idx[sh.bus])
        cols.append(idx[sh.bus])
        vals.append(1j * q / case.base_mva)
    ybus = sparse.coo_matrix(
        (np.array(vals, dtype=complex), (np.array(rows, dtype=int), np.array(cols, dtype=int))),
        shape=(n, n),
    )
    return ybus.tocsr()
