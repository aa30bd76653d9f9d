"""Geomagnetic disturbance overlay: dc network, induced currents, heating.

The dc network is the standard single-phase equivalent: line and winding
conductances are 3/R_phase, every transformer is modeled as a grounded-wye
winding at its high-voltage bus, and substation neutrals reach remote
earth through the grounding resistance. A uniform geoelectric field is
integrated along each line (equirectangular projection) to get the source
EMFs; the nodal solve then gives neutral and winding currents, which feed
transformer reactive losses and a first-order hot-spot temperature model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .model import BranchStatus, NetworkCase

EARTH_RADIUS_KM = 6371.0
MIN_LINE_DC_OHM = 1e-6


class GicConstructionError(Exception):
    """The dc network has an island with no path to ground."""


@dataclass
class FieldEvent:
    """Uniform geoelectric field: onset/duration plus a breakpoint waveform."""

    onset: float
    duration: float
    waveform: list[tuple[float, float, float]]  # (t_offset, E_north, E_east) V/km

    def to_doc(self) -> dict:
        return {
            "onset": self.onset,
            "duration": self.duration,
            "waveform": [[t, en, ee] for t, en, ee in self.waveform],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "FieldEvent":
        return cls(
            onset=float(doc["onset"]),
            duration=float(doc["duration"]),
            waveform=[(float(t), float(en), float(ee)) for t, en, ee in doc["waveform"]],
        )


@dataclass
class GmdParams:
    thermal_eta: float = 2.0      # deg C rise per ampere at steady state
    thermal_tau: float = 600.0    # s
    ambient_c: float = 25.0
    contour_rows: int = 16
    contour_cols: int = 20


@dataclass
class GicSolution:
    neutral_amps: dict[int, float]          # substation id -> A, into ground positive
    winding_amps: dict[int, float]          # transformer branch id -> A
    q_loss_mvar: dict[int, float]           # transformer branch id -> Mvar
    field_samples: dict[int, tuple[float, float]]  # substation id -> (E_n, E_e) V/km


class GicNetwork:
    """Reduced nodal dc network with bonded (zero-resistance) windings merged."""

    def __init__(self, case: NetworkCase, branch_closed: Optional[np.ndarray] = None,
                 strict: bool = True):
        self.build(case, branch_closed, strict)

    def build(self, case: NetworkCase, branch_closed: Optional[np.ndarray] = None,
              strict: bool = True) -> None:
        if branch_closed is None:
            branch_closed = np.array(
                [b.status == BranchStatus.CLOSED for b in case.branches], dtype=bool
            )
        self.closed_sig = branch_closed.tobytes()

        base_kv = {b.id: b.base_kv for b in case.buses}
        sub_of_bus = {b.id: b.substation_id for b in case.buses}
        grounding = {s.id: s.grounding_resistance_ohm for s in case.substations}

        # raw node keys: ("bus", id) and ("neutral", substation id)
        lines = []    # (branch_id, from_key, to_key, conductance)
        windings = [] # (branch_id, bus_key, neutral_key, conductance or None for bond)
        used: list = []

        def touch(key):
            if key not in node_ids:
                node_ids[key] = len(used)
                used.append(key)

        node_ids: dict = {}
        for k, br in enumerate(case.branches):
            if not branch_closed[k]:
                continue
            if br.is_transformer:
                hv = br.from_bus if base_kv[br.from_bus] >= base_kv[br.to_bus] else br.to_bus
                bus_key = ("bus", hv)
                neut_key = ("neutral", sub_of_bus[hv])
                touch(bus_key)
                touch(neut_key)
                g = None if br.dc_resistance_ohm <= 0.0 else 3.0 / br.dc_resistance_ohm
                windings.append((br.id, bus_key, neut_key, g))
            else:
                fk, tk = ("bus", br.from_bus), ("bus", br.to_bus)
                touch(fk)
                touch(tk)
                r = max(br.dc_resistance_ohm, MIN_LINE_DC_OHM)
                lines.append((br.id, fk, tk, 3.0 / r))

        # union-find over bonds
        parent = list(range(len(used)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for _, bus_key, neut_key, g in windings:
            if g is None:
                a, b = find(node_ids[bus_key]), find(node_ids[neut_key])
                if a != b:
                    parent[a] = b

        canon: dict[int, int] = {}
        for i in range(len(used)):
            r = find(i)
            if r not in canon:
                canon[r] = len(canon)
        self.n_nodes = len(canon)
        self.node_of = {key: canon[find(i)] for key, i in node_ids.items()}

        self.grounds: list[tuple[int, int, float]] = []  # (substation id, node, conductance)
        for key, i in node_ids.items():
            if key[0] == "neutral":
                self.grounds.append((key[1], self.node_of[key], 1.0 / grounding[key[1]]))

        rows, cols, vals = [], [], []

        def stamp(a, b, g):
            rows.extend([a, b, a, b])
            cols.extend([a, b, b, a])
            vals.extend([g, g, -g, -g])

        self.lines = []
        for bid, fk, tk, g in lines:
            a, b = self.node_of[fk], self.node_of[tk]
            if a != b:
                stamp(a, b, g)
            self.lines.append((bid, a, b, g, fk[1], tk[1]))
        self.windings = []
        for bid, bus_key, neut_key, g in windings:
            a, b = self.node_of[bus_key], self.node_of[neut_key]
            if g is not None and a != b:
                stamp(a, b, g)
            self.windings.append((bid, a, b, g, bus_key[1]))
        for _, node, g in self.grounds:
            rows.append(node)
            cols.append(node)
            vals.append(g)

        self.g_matrix = sparse.coo_matrix(
            (np.array(vals), (np.array(rows), np.array(cols))), shape=(self.n_nodes, self.n_nodes)
        ).tocsr()

        grounded_nodes = {node for _, node, _ in self.grounds}
        self.live = _grounded_components(self.n_nodes, rows, cols, grounded_nodes)
        if strict and not all(self.live[n] for n in range(self.n_nodes)):
            dead = [key for key, n in self.node_of.items() if not self.live[n]]
            raise GicConstructionError(f"dc nodes with no ground path: {sorted(dead)[:5]}")

    def ensure(self, case: NetworkCase, branch_closed: np.ndarray) -> None:
        """Rebuild when the breaker pattern has changed since construction."""
        if branch_closed.tobytes() != self.closed_sig:
            self.build(case, branch_closed, strict=False)


def _grounded_components(n, rows, cols, grounded) -> np.ndarray:
    adj: dict[int, set[int]] = {}
    for a, b in zip(rows, cols):
        if a != b:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    live = np.zeros(n, dtype=bool)
    stack = list(grounded)
    while stack:
        i = stack.pop()
        if live[i]:
            continue
        live[i] = True
        stack.extend(adj.get(i, ()))
    return live


def build_dc_network(case: NetworkCase, branch_closed: Optional[np.ndarray] = None,
                     strict: bool = True) -> GicNetwork:
    return GicNetwork(case, branch_closed, strict)


def line_displacements(case: NetworkCase) -> dict[int, tuple[float, float]]:
    """Per-branch (north_km, east_km) between endpoint substations."""
    sub = {s.id: s for s in case.substations}
    sub_of_bus = {b.id: b.substation_id for b in case.buses}
    out = {}
    for br in case.branches:
        sf = sub[sub_of_bus[br.from_bus]]
        st = sub[sub_of_bus[br.to_bus]]
        north = EARTH_RADIUS_KM * math.radians(st.latitude - sf.latitude)
        mean_lat = math.radians((st.latitude + sf.latitude) / 2.0)
        east = EARTH_RADIUS_KM * math.cos(mean_lat) * math.radians(st.longitude - sf.longitude)
        out[br.id] = (north, east)
    return out


def induced_line_voltages(case: NetworkCase, e_north: float, e_east: float) -> dict[int, float]:
    """Uniform-field EMF per branch in volts, oriented from -> to."""
    disp = line_displacements(case)
    return {bid: e_north * n + e_east * e for bid, (n, e) in disp.items()}


def solve_gic(net: GicNetwork, emfs: dict[int, float]) -> GicSolution:
    """Nodal dc solve for the given per-line EMFs (volts, from -> to)."""
    inj = np.zeros(net.n_nodes)
    for bid, a, b, g, _, _ in net.lines:
        e = emfs.get(bid, 0.0)
        if e != 0.0 and a != b:
            inj[a] -= e * g
            inj[b] += e * g

    v = np.zeros(net.n_nodes)
    live_idx = np.flatnonzero(net.live)
    if live_idx.size:
        g_live = net.g_matrix[live_idx][:, live_idx].tocsc()
        sol = spsolve(g_live, inj[live_idx])
        if not np.all(np.isfinite(sol)):
            raise GicConstructionError("singular dc system")
        v[live_idx] = sol

    neutral = {}
    for sid, node, g in net.grounds:
        neutral[sid] = neutral.get(sid, 0.0) + v[node] * g

    # line currents (internal, from -> to) for bonded-winding recovery
    line_current: dict[int, float] = {}
    for bid, a, b, g, _, _ in net.lines:
        line_current[bid] = (v[a] - v[b] + emfs.get(bid, 0.0)) * g

    winding = {}
    bond_groups: dict[int, list[int]] = {}  # hv bus id -> bonded winding branch ids
    for bid, a, b, g, hv_bus in net.windings:
        if g is not None:
            winding[bid] = (v[a] - v[b]) * g
        else:
            bond_groups.setdefault(hv_bus, []).append(bid)
    for hv_bus, members in bond_groups.items():
        # everything the lines deliver to the bus leaves through its winding(s)
        inflow = 0.0
        for bid, a, b, g, from_bus, to_bus in net.lines:
            if to_bus == hv_bus:
                inflow += line_current[bid]
            if from_bus == hv_bus:
                inflow -= line_current[bid]
        for bid in members:
            winding[bid] = inflow / len(members)

    return GicSolution(neutral_amps=neutral, winding_amps=winding, q_loss_mvar={}, field_samples={})


def gic_reactive_losses(sol: GicSolution, case: NetworkCase, vm: Optional[np.ndarray]) -> dict[int, float]:
    """Extra Mvar per transformer: k factor x bus voltage x |winding current|."""
    pos = case.bus_index()
    base_kv = {b.id: b.base_kv for b in case.buses}
    out = {}
    for br in case.branches:
        if not br.is_transformer or br.id not in sol.winding_amps:
            continue
        hv = br.from_bus if base_kv[br.from_bus] >= base_kv[br.to_bus] else br.to_bus
        v_pu = 1.0 if vm is None else float(vm[pos[hv]])
        out[br.id] = br.gic_k_factor * v_pu * abs(sol.winding_amps[br.id])
    return out


def thermal_step(theta_rise: float, i_eff: float, dt: float, eta: float, tau: float) -> float:
    """First-order hot-spot rise: exponential approach to eta * |I|."""
    return theta_rise + dt * (eta * abs(i_eff) - theta_rise) / tau


def gmd_event_field(t: float, event: FieldEvent) -> Optional[tuple[float, float]]:
    """Field at sim time t, or None outside [onset, onset + duration]."""
    if t < event.onset or t > event.onset + event.duration:
        return None
    off = t - event.onset
    wf = event.waveform
    if not wf:
        return (0.0, 0.0)
    if off <= wf[0][0]:
        return (wf[0][1], wf[0][2])
    if off >= wf[-1][0]:
        return (wf[-1][1], wf[-1][2])
    for j in range(1, len(wf)):
        if off <= wf[j][0]:
            t0, n0, e0 = wf[j - 1]
            t1, n1, e1 = wf[j]
            frac = (off - t0) / (t1 - t0)
            return (n0 + frac * (n1 - n0), e0 + frac * (e1 - e0))
    return (wf[-1][1], wf[-1][2])


def sample_field_contour(
    samples: list[tuple[float, float, float]],
    rows: int,
    cols: int,
    bbox: tuple[float, float, float, float],
) -> list[list[float]]:
    """Inverse-distance-weighted (power 2) grid of a scalar over (lat, lon) samples.

    bbox is (lat_min, lon_min, lat_max, lon_max); the returned grid is
    row-major from lat_min to lat_max. A grid point sitting on a sample
    takes that sample's value exactly.
    """
    lat_min, lon_min, lat_max, lon_max = bbox
    grid = []
    for r in range(rows):
        lat = lat_min + (lat_max - lat_min) * (r / (rows - 1) if rows > 1 else 0.5)
        row = []
        for c in range(cols):
            lon = lon_min + (lon_max - lon_min) * (c / (cols - 1) if cols > 1 else 0.5)
            num = den = 0.0
            exact = None
            for slat, slon, val in samples:
                d2 = (lat - slat) ** 2 + (lon - slon) ** 2
                if d2 < 1e-18:
                    exact = val
                    break
                w = 1.0 / d2
                num += w * val
                den += w
            row.append(exact if exact is not None else num / den)
        grid.append(row)
    return grid


def gic_step(case: NetworkCase, st, event: FieldEvent, net: GicNetwork,
             params: GmdParams, dt: float) -> Optional[dict]:
    """Engine hook: advance thermal states and produce the gmd data block.

    Returns None while the field event is inactive (no gmd topics are
    published then); thermal states still relax toward ambient and the
    lagged reactive losses are cleared.
    """
    field = gmd_event_field(st.sim_time, event)
    xfmr_idx = [k for k, br in enumerate(case.branches) if br.is_transformer]

    if field is None:
        st.gic_q_mvar = {}
        for k in xfmr_idx:
            st.xfmr_temp_rise[k] = thermal_step(
                st.xfmr_temp_rise[k], 0.0, dt, params.thermal_eta, params.thermal_tau
            )
        return None

    e_north, e_east = field
    net.ensure(case, st.device.branch_closed)
    emfs = induced_line_voltages(case, e_north, e_east)
    sol = solve_gic(net, emfs)
    vm = None if st.collapsed or st.solution is None else st.solution.vm
    sol.q_loss_mvar = gic_reactive_losses(sol, case, vm)
    for s in case.substations:
        sol.field_samples[s.id] = (e_north, e_east)

    # losses feed the next step's solve at the transformer's hv bus
    base_kv = {b.id: b.base_kv for b in case.buses}
    next_q: dict[int, float] = {}
    for br in case.branches:
        if br.id in sol.q_loss_mvar:
            hv = br.from_bus if base_kv[br.from_bus] >= base_kv[br.to_bus] else br.to_bus
            next_q[hv] = next_q.get(hv, 0.0) + sol.q_loss_mvar[br.id]
    st.gic_q_mvar = next_q

    transformers = []
    for k in xfmr_idx:
        br = case.branches[k]
        i_eff = sol.winding_amps.get(br.id, 0.0)
        st.xfmr_temp_rise[k] = thermal_step(
            st.xfmr_temp_rise[k], i_eff, dt, params.thermal_eta, params.thermal_tau
        )
        transformers.append({
            "id": br.id,
            "neutral_a": float(i_eff),
            "temp_c": params.ambient_c + float(st.xfmr_temp_rise[k]),
            "q_loss_mvar": float(sol.q_loss_mvar.get(br.id, 0.0)),
        })

    lats = [s.latitude for s in case.substations]
    lons = [s.longitude for s in case.substations]
    margin = 0.25
    bbox = (min(lats) - margin, min(lons) - margin, max(lats) + margin, max(lons) + margin)
    mag = math.hypot(e_north, e_east)
    contour = sample_field_contour(
        [(s.latitude, s.longitude, mag) for s in case.substations],
        params.contour_rows, params.contour_cols, bbox,
    )
    return {
        "active": True,
        "field": {"e_north": e_north, "e_east": e_east, "mag_v_per_km": mag},
        "substations": [
            {"id": s.id, "e_north": e_north, "e_east": e_east} for s in case.substations
        ],
        "neutrals": [
            {"id": sid, "amps": float(a)} for sid, a in sorted(sol.neutral_amps.items())
        ],
        "transformers": transformers,
        "contour": {
            "rows": params.contour_rows,
            "cols": params.contour_cols,
            "bbox": list(bbox),
            "values": contour,
        },
    }
