"""Import of the MATPOWER plain-text case subset (baseMVA, bus, gen, branch).

Fields the native model needs but MATPOWER does not carry (geography,
grounding, dc resistance, GIC factors) are filled with the declared
defaults so the GIC and map features stay usable on imported cases.
"""

from __future__ import annotations

import re

from .model import (
    Area,
    Branch,
    BranchStatus,
    Bus,
    BusType,
    CaseError,
    GenStatus,
    Generator,
    IntegrityError,
    Load,
    NetworkCase,
    ShuntStatus,
    Substation,
    SwitchedShunt,
    _autofill_containment,
    validate_case,
)

DEFAULT_GROUNDING_OHM = 0.5
DEFAULT_GIC_K = 1.0

_BUS_TYPE = {1: BusType.PQ, 2: BusType.PV, 3: BusType.SLACK}


class MatpowerParseError(CaseError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


def _strip_comments(text: str) -> list[str]:
    return [line.split("%", 1)[0] for line in text.splitlines()]


def _find_matrix(lines: list[str], name: str) -> tuple[list[list[float]], list[int]]:
    """Rows of `mpc.<name> = [ ... ];` plus the source line number of each row."""
    start = None
    for i, line in enumerate(lines):
        if re.search(rf"mpc\.{name}\s*=\s*\[", line):
            start = i
            break
    if start is None:
        raise MatpowerParseError(0, f"mpc.{name} matrix not found")
    rows: list[list[float]] = []
    line_nos: list[int] = []
    body = lines[start][lines[start].index("[") + 1 :]
    i = start
    while True:
        closing = "]" in body
        if closing:
            body = body.split("]", 1)[0]
        for chunk in body.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                rows.append([float(tok) for tok in chunk.split()])
            except ValueError:
                raise MatpowerParseError(i + 1, f"bad numeric token in mpc.{name} row: {chunk!r}") from None
            line_nos.append(i + 1)
        if closing:
            break
        i += 1
        if i >= len(lines):
            raise MatpowerParseError(len(lines), f"mpc.{name} matrix not terminated with ']'")
        body = lines[i]
    return rows, line_nos


def _find_scalar(lines: list[str], name: str) -> float:
    for i, line in enumerate(lines):
        m = re.search(rf"mpc\.{name}\s*=\s*([-\d.eE+]+)\s*;", line)
        if m:
            return float(m.group(1))
    raise MatpowerParseError(0, f"mpc.{name} not found")


def _grid_coords(ordinal: int) -> tuple[float, float]:
    """Deterministic lat/lon layout for imported cases (row-major grid, ~30 km pitch)."""
    cols = 40
    row, col = divmod(ordinal, cols)
    return 30.0 + row * 0.27, -97.0 + col * 0.27


def import_matpower_subset(text: str) -> tuple[NetworkCase, list[str]]:
    """Parse a MATPOWER case text into a NetworkCase.

    Returns (case, warnings). Warnings collect unsupported but non-fatal
    fields (e.g. branch phase-shift angles).
    """
    lines = _strip_comments(text)
    warnings: list[str] = []

    base_mva = _find_scalar(lines, "baseMVA")
    bus_rows, bus_lines = _find_matrix(lines, "bus")
    gen_rows, gen_lines = _find_matrix(lines, "gen")
    branch_rows, branch_lines = _find_matrix(lines, "branch")
    try:
        gencost_rows, _ = _find_matrix(lines, "gencost")
    except MatpowerParseError:
        gencost_rows = []

    case = NetworkCase(base_mva=base_mva)
    area_ids: set[int] = set()

    for ordinal, (row, ln) in enumerate(zip(bus_rows, bus_lines)):
        if len(row) < 13:
            raise MatpowerParseError(ln, f"bus row has {len(row)} columns, expected >= 13")
        bus_i = int(row[0])
        btype = _BUS_TYPE.get(int(row[1]))
        if btype is None:
            raise MatpowerParseError(ln, f"bus {bus_i}: unknown bus type {int(row[1])}")
        area = int(row[6]) if row[6] > 0 else 1
        area_ids.add(area)
        lat, lon = _grid_coords(ordinal)
        case.substations.append(
            Substation(
                id=bus_i,
                name=f"Sub {bus_i}",
                latitude=lat,
                longitude=lon,
                grounding_resistance_ohm=DEFAULT_GROUNDING_OHM,
            )
        )
        case.buses.append(
            Bus(
                id=bus_i,
                name=f"Bus {bus_i}",
                base_kv=row[9] if row[9] > 0 else 138.0,
                type=btype,
                v_min=row[12] if row[12] > 0 else 0.95,
                v_max=row[11] if row[11] > 0 else 1.05,
                substation_id=bus_i,
            )
        )
        pd, qd = row[2], row[3]
        if pd != 0.0 or qd != 0.0:
            case.loads.append(Load(id=len(case.loads) + 1, bus=bus_i, p_nominal=pd, q_nominal=qd))
        gs, bs = row[4], row[5]
        if bs != 0.0:
            case.shunts.append(
                SwitchedShunt(id=len(case.shunts) + 1, bus=bus_i, q_nominal=bs, status=ShuntStatus.ON)
            )
        if gs != 0.0:
            warnings.append(f"bus {bus_i}: conductance shunt Gs={gs} not modeled, dropped")

    sub_by_area: dict[int, list[int]] = {}
    for row in bus_rows:
        sub_by_area.setdefault(int(row[6]) if row[6] > 0 else 1, []).append(int(row[0]))
    for aid in sorted(area_ids):
        case.areas.append(Area(id=aid, name=f"Area {aid}", substation_ids=sorted(sub_by_area[aid])))

    for gi, (row, ln) in enumerate(zip(gen_rows, gen_lines)):
        if len(row) < 10:
            raise MatpowerParseError(ln, f"gen row has {len(row)} columns, expected >= 10")
        cost = gencost_rows[gi] if gi < len(gencost_rows) else None
        a = b = c = 0.0
        if cost is not None:
            if int(cost[0]) == 2 and len(cost) >= 7 and int(cost[3]) == 3:
                c, b, a = cost[4], cost[5], cost[6]
            else:
                warnings.append(f"gencost row {gi + 1}: only 3-term polynomial costs mapped")
        p_min, p_max = min(row[9], row[8]), max(row[9], row[8])
        case.generators.append(
            Generator(
                id=gi + 1,
                bus=int(row[0]),
                status=GenStatus.ONLINE if row[7] > 0 else GenStatus.OFFLINE,
                p_set=min(max(row[1], p_min), p_max),
                p_min=p_min,
                p_max=p_max,
                q_min=min(row[4], row[3]),
                q_max=max(row[4], row[3]),
                v_setpoint=row[5] if row[5] > 0 else 1.0,
                cost_a=a,
                cost_b=b,
                cost_c=c,
            )
        )

    base_kv_of = {b.id: b.base_kv for b in case.buses}
    for bi, (row, ln) in enumerate(zip(branch_rows, branch_lines)):
        if len(row) < 11:
            raise MatpowerParseError(ln, f"branch row has {len(row)} columns, expected >= 11")
        fbus, tbus = int(row[0]), int(row[1])
        ratio = row[8]
        is_xfmr = ratio != 0.0
        if len(row) >= 10 and row[9] != 0.0:
            warnings.append(f"branch row {bi + 1}: phase shift angle {row[9]} deg not modeled, dropped")
        kv = base_kv_of.get(fbus, 138.0)
        dc_r = row[2] * (kv * kv / base_mva)
        if dc_r <= 0.0:
            dc_r = 0.0  # treated as a perfect dc bond by the gic builder
        tap = ratio if is_xfmr else 1.0
        case.branches.append(
            Branch(
                id=bi + 1,
                from_bus=fbus,
                to_bus=tbus,
                r=row[2],
                x=row[3],
                b_charging=row[4],
                tap_ratio=tap,
                tap_min=min(0.9, tap),
                tap_max=max(1.1, tap),
                mva_limit=row[5] if row[5] > 0 else 9999.0,
                dc_resistance_ohm=dc_r,
                is_transformer=is_xfmr,
                gic_k_factor=DEFAULT_GIC_K if is_xfmr else 0.0,
                status=BranchStatus.CLOSED if row[10] > 0 else BranchStatus.OPEN,
            )
        )

    _autofill_containment(case)
    findings = validate_case(case)
    errors = [f for f in findings if f.severity == "error"]
    if errors:
        raise IntegrityError("; ".join(str(f) for f in errors))
    return case, warnings
