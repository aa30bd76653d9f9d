"""Quasi-steady-state stepping engine.

One step applies due commands, moves the load along its profile, ramps
generators, solves the AC flow with Q limits, then derives violations,
ACE, cost and the reliability score. The step is a pure function of
(state, commands, profile, dt): identical inputs give bit-identical
measurements, which is what makes session replay exact.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .commands import Command, CommandKind
from .encoding import digest
from .gmd import FieldEvent, GicNetwork, GmdParams, gic_step
from .model import (
    BranchStatus,
    BusType,
    GenStatus,
    LoadStatus,
    NetworkCase,
    ShuntStatus,
)
from .powerflow import (
    PowerFlowDiverged,
    PowerFlowOptions,
    PowerFlowSolution,
    build_case_spec,
    compute_branch_flows,
    detect_violations,
    distribute_generation,
    enforce_q_limits,
    solve_power_flow,
    ViolationSet,
)

DEFAULT_DT_SIM = 2.0


@dataclass
class EngineConfig:
    dt_sim: float = DEFAULT_DT_SIM
    beta_sys: float = 100.0            # MW per Hz, uniform-frequency proxy
    violation_weight_bus: float = 0.5  # score points per violation-minute
    violation_weight_branch: float = 0.5
    agc_gain: float = 0.25             # fraction of ACE corrected per step
    tap_band: tuple[float, float] = (0.99, 1.01)
    pf_options: PowerFlowOptions = field(default_factory=PowerFlowOptions)
    gmd: GmdParams = field(default_factory=GmdParams)


@dataclass
class LoadProfile:
    """Piecewise-linear load multiplier over sim time, with optional seeded noise."""

    breakpoints: list[tuple[float, float]] = field(default_factory=lambda: [(0.0, 1.0)])
    noise_sigma: float = 0.0
    seed: int = 0

    def multiplier(self, t: float, step_index: int = 0) -> float:
        ts = [b[0] for b in self.breakpoints]
        ms = [b[1] for b in self.breakpoints]
        if t <= ts[0]:
            m = ms[0]
        elif t >= ts[-1]:
            m = ms[-1]
        else:
            j = bisect.bisect_right(ts, t)
            frac = (t - ts[j - 1]) / (ts[j] - ts[j - 1])
            m = ms[j - 1] + frac * (ms[j] - ms[j - 1])
        if self.noise_sigma > 0.0:
            rng = np.random.default_rng([self.seed, step_index])
            m *= 1.0 + self.noise_sigma * float(rng.standard_normal())
        return max(m, 1e-6)


@dataclass
class DeviceState:
    """Mutable overlay over the immutable case: everything operators can move."""

    gen_committed: np.ndarray
    gen_breaker_closed: np.ndarray
    gen_p_set: np.ndarray      # current (ramp-limited) dispatch
    gen_p_target: np.ndarray   # operator-requested dispatch
    gen_v_set: np.ndarray
    gen_q_fixed: np.ndarray
    load_served: np.ndarray
    load_closed: np.ndarray
    shunt_on: np.ndarray
    shunt_q: np.ndarray
    branch_closed: np.ndarray
    taps: np.ndarray
    tap_auto: np.ndarray
    area_sched_export: np.ndarray
    area_agc: np.ndarray

    @classmethod
    def from_case(cls, case: NetworkCase) -> "DeviceState":
        return cls(
            gen_committed=np.array([g.status == GenStatus.ONLINE for g in case.generators], dtype=bool),
            gen_breaker_closed=np.ones(len(case.generators), dtype=bool),
            gen_p_set=np.array([g.p_set for g in case.generators], dtype=float),
            gen_p_target=np.array([g.p_set for g in case.generators], dtype=float),
            gen_v_set=np.array([g.v_setpoint for g in case.generators], dtype=float),
            gen_q_fixed=np.zeros(len(case.generators)),
            load_served=np.array([l.served_fraction for l in case.loads], dtype=float),
            load_closed=np.array([l.status == LoadStatus.CLOSED for l in case.loads], dtype=bool),
            shunt_on=np.array([s.status == ShuntStatus.ON for s in case.shunts], dtype=bool),
            shunt_q=np.array([s.q_nominal for s in case.shunts], dtype=float),
            branch_closed=np.array([b.status == BranchStatus.CLOSED for b in case.branches], dtype=bool),
            taps=np.array([b.tap_ratio for b in case.branches], dtype=float),
            tap_auto=np.zeros(len(case.branches), dtype=bool),
            area_sched_export=np.array([a.scheduled_export for a in case.areas], dtype=float),
            area_agc=np.zeros(len(case.areas), dtype=bool),
        )

    def copy(self) -> "DeviceState":
        return DeviceState(**{k: v.copy() for k, v in self.__dict__.items()})

    @property
    def gen_online(self) -> np.ndarray:
        return self.gen_committed & self.gen_breaker_closed


@dataclass
class SimulationState:
    sim_time: float
    step_index: int
    device: DeviceState
    load_scale: float = 1.0
    collapsed: bool = False
    solution: Optional[PowerFlowSolution] = None
    v_warm: Optional[np.ndarray] = None
    score: float = 100.0
    cost_accrued: float = 0.0
    freq_dev: float = 0.0
    last_ace: dict[int, float] = field(default_factory=dict)
    pending: list[Command] = field(default_factory=list)
    xfmr_temp_rise: Optional[np.ndarray] = None   # per branch, transformers only
    gic_q_mvar: dict[int, float] = field(default_factory=dict)  # bus id -> Mvar, one-step lag

    @classmethod
    def initial(cls, case: NetworkCase) -> "SimulationState":
        return cls(
            sim_time=0.0,
            step_index=0,
            device=DeviceState.from_case(case),
            xfmr_temp_rise=np.zeros(len(case.branches)),
        )

    def copy(self) -> "SimulationState":
        return SimulationState(
            sim_time=self.sim_time,
            step_index=self.step_index,
            device=self.device.copy(),
            load_scale=self.load_scale,
            collapsed=self.collapsed,
            solution=self.solution,
            v_warm=None if self.v_warm is None else self.v_warm.copy(),
            score=self.score,
            cost_accrued=self.cost_accrued,
            freq_dev=self.freq_dev,
            last_ace=dict(self.last_ace),
            pending=list(self.pending),
            xfmr_temp_rise=None if self.xfmr_temp_rise is None else self.xfmr_temp_rise.copy(),
            gic_q_mvar=dict(self.gic_q_mvar),
        )


@dataclass
class Measurements:
    """One step's published snapshot; to_doc() is the wire and digest form."""

    step_index: int
    sim_time: float
    blackout: bool
    bus_ids: list[int]
    v_pu: list[float]
    angle_rad: list[float]
    branch_ids: list[int]
    p_from_mw: list[float]
    q_from_mvar: list[float]
    p_to_mw: list[float]
    q_to_mvar: list[float]
    loading_pct: list[float]
    branch_closed: list[bool]
    gen_ids: list[int]
    gen_p_mw: list[float]
    gen_q_mvar: list[float]
    gen_online: list[bool]
    gen_p_target_mw: list[float]
    gen_v_set: list[float]
    areas: dict[int, dict]
    violations: dict
    score: float
    cost_rate: float
    cost_accrued: float
    freq_dev_hz: float
    load_scale: float
    gmd: Optional[dict] = None

    def to_doc(self) -> dict:
        doc = {
            "step": self.step_index,
            "sim_time": self.sim_time,
            "blackout": self.blackout,
            "bus": {"ids": self.bus_ids, "v_pu": self.v_pu, "angle_rad": self.angle_rad},
            "branch": {
                "ids": self.branch_ids,
                "p_from_mw": self.p_from_mw,
                "q_from_mvar": self.q_from_mvar,
                "p_to_mw": self.p_to_mw,
                "q_to_mvar": self.q_to_mvar,
                "loading_pct": self.loading_pct,
                "closed": self.branch_closed,
            },
            "gen": {
                "ids": self.gen_ids,
                "p_mw": self.gen_p_mw,
                "q_mvar": self.gen_q_mvar,
                "online": self.gen_online,
                "p_target_mw": self.gen_p_target_mw,
                "v_set": self.gen_v_set,
            },
            "area": {str(k): v for k, v in sorted(self.areas.items())},
            "violations": self.violations,
            "score": self.score,
            "cost_rate": self.cost_rate,
            "cost_accrued": self.cost_accrued,
            "freq_dev_hz": self.freq_dev_hz,
            "load_scale": self.load_scale,
        }
        if self.gmd is not None:
            doc["gmd"] = self.gmd
        return doc

    def digest(self) -> str:
        return digest(self.to_doc())


def apply_command(case: NetworkCase, device: DeviceState, cmd: Command) -> str:
    """Mutate the device overlay for one already-authorized command."""
    k = cmd.kind
    if k in (CommandKind.OPEN_BRANCH, CommandKind.OPEN_BRANCH_TIMED, CommandKind.CLOSE_BRANCH,
             CommandKind.SET_TRANSFORMER_TAP, CommandKind.SET_TRANSFORMER_TAP_AUTO):
        idx = next(i for i, b in enumerate(case.branches) if b.id == cmd.target)
        if k in (CommandKind.OPEN_BRANCH, CommandKind.OPEN_BRANCH_TIMED):
            device.branch_closed[idx] = False
            return f"branch {cmd.target} opened"
        if k == CommandKind.CLOSE_BRANCH:
            device.branch_closed[idx] = True
            return f"branch {cmd.target} closed"
        if k == CommandKind.SET_TRANSFORMER_TAP:
            device.tap_auto[idx] = False
            device.taps[idx] = float(cmd.value)
            return f"branch {cmd.target} tap set to {cmd.value}"
        device.tap_auto[idx] = bool(cmd.value)
        return f"branch {cmd.target} tap auto {'on' if cmd.value else 'off'}"

    if k in (CommandKind.SET_GEN_MW, CommandKind.SET_GEN_VOLTAGE_SETPOINT, CommandKind.SET_GEN_MVAR,
             CommandKind.COMMIT_GEN, CommandKind.DECOMMIT_GEN, CommandKind.OPEN_GEN_BREAKER,
             CommandKind.CLOSE_GEN_BREAKER):
        idx = next(i for i, g in enumerate(case.generators) if g.id == cmd.target)
        gen = case.generators[idx]
        if k == CommandKind.SET_GEN_MW:
            device.gen_p_target[idx] = float(cmd.value)
            return f"generator {cmd.target} MW target {cmd.value}"
        if k == CommandKind.SET_GEN_VOLTAGE_SETPOINT:
            device.gen_v_set[idx] = float(cmd.value)
            return f"generator {cmd.target} voltage setpoint {cmd.value}"
        if k == CommandKind.SET_GEN_MVAR:
            device.gen_q_fixed[idx] = float(cmd.value)
            return f"generator {cmd.target} Mvar {cmd.value}"
        if k == CommandKind.COMMIT_GEN:
            device.gen_committed[idx] = True
            if device.gen_p_set[idx] < gen.p_min:
                device.gen_p_set[idx] = gen.p_min
                device.gen_p_target[idx] = max(device.gen_p_target[idx], gen.p_min)
            return f"generator {cmd.target} committed"
        if k == CommandKind.DECOMMIT_GEN:
            device.gen_committed[idx] = False
            return f"generator {cmd.target} decommitted"
        if k == CommandKind.OPEN_GEN_BREAKER:
            device.gen_breaker_closed[idx] = False
            return f"generator {cmd.target} breaker opened"
        device.gen_breaker_closed[idx] = True
        return f"generator {cmd.target} breaker closed"

    if k in (CommandKind.SWITCH_SHUNT_ON, CommandKind.SWITCH_SHUNT_OFF, CommandKind.SET_SHUNT_MVAR):
        idx = next(i for i, s in enumerate(case.shunts) if s.id == cmd.target)
        if k == CommandKind.SWITCH_SHUNT_ON:
            device.shunt_on[idx] = True
            return f"shunt {cmd.target} on"
        if k == CommandKind.SWITCH_SHUNT_OFF:
            device.shunt_on[idx] = False
            return f"shunt {cmd.target} off"
        device.shunt_q[idx] = float(cmd.value)
        return f"shunt {cmd.target} sized to {cmd.value} Mvar"

    if k in (CommandKind.SHED_LOAD_PERCENT, CommandKind.RESTORE_LOAD_PERCENT,
             CommandKind.OPEN_LOAD_BREAKER, CommandKind.CLOSE_LOAD_BREAKER):
        idx = next(i for i, l in enumerate(case.loads) if l.id == cmd.target)
        if k == CommandKind.SHED_LOAD_PERCENT:
            device.load_served[idx] = max(0.0, device.load_served[idx] - float(cmd.value) / 100.0)
            return f"load {cmd.target} shed {cmd.value}%"
        if k == CommandKind.RESTORE_LOAD_PERCENT:
            device.load_served[idx] = min(1.0, device.load_served[idx] + float(cmd.value) / 100.0)
            return f"load {cmd.target} restored {cmd.value}%"
        if k == CommandKind.OPEN_LOAD_BREAKER:
            device.load_closed[idx] = False
            return f"load {cmd.target} breaker opened"
        device.load_closed[idx] = True
        return f"load {cmd.target} breaker closed"

    idx = next(i for i, a in enumerate(case.areas) if a.id == cmd.target)
    if k == CommandKind.SET_AREA_INTERCHANGE_SCHEDULE:
        device.area_sched_export[idx] = float(cmd.value)
        return f"area {cmd.target} interchange schedule {cmd.value} MW"
    device.area_agc[idx] = bool(cmd.value)
    return f"area {cmd.target} AGC {'on' if cmd.value else 'off'}"


def bus_area_map(case: NetworkCase) -> dict[int, int]:
    """Bus id -> area id through the substation containment chain."""
    sub_area = {}
    for a in case.areas:
        for sid in a.substation_ids:
            sub_area[sid] = a.id
    return {b.id: sub_area.get(b.substation_id, case.areas[0].id if case.areas else 0) for b in case.buses}


def compute_ace(case: NetworkCase, state: SimulationState) -> dict[int, float]:
    """Area control error per area: (actual - scheduled export) - 10 B df."""
    sol = state.solution
    if sol is None or sol.p_from_mw is None:
        return {a.id: 0.0 for a in case.areas}
    barea = bus_area_map(case)
    export: dict[int, float] = {a.id: 0.0 for a in case.areas}
    for k, br in enumerate(case.branches):
        fa, ta = barea[br.from_bus], barea[br.to_bus]
        if fa == ta:
            continue
        export[fa] = export.get(fa, 0.0) + sol.p_from_mw[k]
        export[ta] = export.get(ta, 0.0) + sol.p_to_mw[k]
    out = {}
    for j, a in enumerate(case.areas):
        sched = state.device.area_sched_export[j]
        out[a.id] = (export[a.id] - sched) - 10.0 * a.frequency_bias_b * state.freq_dev
    return out


def compute_cost_rate(case: NetworkCase, state: SimulationState) -> float:
    """Hourly operating cost of online units: sum of a + b P + c P^2."""
    sol = state.solution
    if sol is None or sol.gen_p_mw is None:
        return 0.0
    online = state.device.gen_online
    rate = 0.0
    for j, g in enumerate(case.generators):
        if online[j] and state.solution.spec.energized[case.bus_index()[g.bus]]:
            p = sol.gen_p_mw[j]
            rate += g.cost_a + g.cost_b * p + g.cost_c * p * p
    return rate


def update_reliability(
    score: float, violations: ViolationSet, dt_sim: float,
    w_bus: float = 0.5, w_branch: float = 0.5,
) -> float:
    """Monotone non-increasing score update, clamped to [0, 100]."""
    penalty = (w_bus * violations.n_bus + w_branch * violations.n_branch) * dt_sim / 60.0
    return max(0.0, score - penalty)


def _ramp(device: DeviceState, case: NetworkCase, dt: float) -> None:
    limit = np.array([g.ramp_rate for g in case.generators]) * dt / 60.0
    delta = np.clip(device.gen_p_target - device.gen_p_set, -limit, limit)
    device.gen_p_set = device.gen_p_set + delta


def _auto_taps(case: NetworkCase, state: SimulationState, cfg: EngineConfig) -> None:
    """One deadband-controller move per step for taps flagged auto."""
    sol = state.solution
    if sol is None:
        return
    pos = case.bus_index()
    dev = state.device
    lo, hi = cfg.tap_band
    for k, br in enumerate(case.branches):
        if not dev.tap_auto[k] or not dev.branch_closed[k]:
            continue
        v_reg = sol.vm[pos[br.to_bus]]
        if v_reg == 0.0:
            continue
        if v_reg < lo:
            dev.taps[k] = max(br.tap_min, dev.taps[k] - br.tap_step)
        elif v_reg > hi:
            dev.taps[k] = min(br.tap_max, dev.taps[k] + br.tap_step)


def _agc(case: NetworkCase, state: SimulationState, cfg: EngineConfig) -> None:
    """Proportional slack-relief dispatch for areas with AGC on (non-tuned)."""
    dev = state.device
    if not dev.area_agc.any():
        return
    barea = bus_area_map(case)
    for j, a in enumerate(case.areas):
        if not dev.area_agc[j]:
            continue
        ace = state.last_ace.get(a.id, 0.0)
        if abs(ace) < 1.0:
            continue
        members = [
            jj for jj, g in enumerate(case.generators)
            if barea[g.bus] == a.id and dev.gen_online[jj]
            and case.bus_by_id(g.bus).type != BusType.SLACK
        ]
        if not members:
            continue
        correction = -cfg.agc_gain * ace
        headroom = np.array([
            case.generators[jj].p_max - dev.gen_p_target[jj] if correction > 0
            else dev.gen_p_target[jj] - case.generators[jj].p_min
            for jj in members
        ])
        total = float(np.sum(np.maximum(headroom, 0.0)))
        if total <= 0:
            continue
        for jj, h in zip(members, np.maximum(headroom, 0.0)):
            dev.gen_p_target[jj] = float(np.clip(
                dev.gen_p_target[jj] + correction * h / total,
                case.generators[jj].p_min, case.generators[jj].p_max,
            ))


def step(
    case: NetworkCase,
    state: SimulationState,
    commands: list[Command],
    profile: LoadProfile,
    dt: float,
    cfg: Optional[EngineConfig] = None,
    gmd_event: Optional[FieldEvent] = None,
    gic_net: Optional[GicNetwork] = None,
) -> tuple[SimulationState, Measurements]:
    """Advance the simulation by dt seconds. Returns the new state and snapshot."""
    cfg = cfg or EngineConfig()
    st = state.copy()
    st.sim_time = state.sim_time + dt
    st.step_index = state.step_index + 1

    # 1. apply commands due at or before the new time, deterministically ordered
    due_time = st.sim_time
    queue = sorted(
        st.pending + list(commands),
        key=lambda c: (c.activate_at if c.activate_at is not None else due_time, c.seq),
    )
    still_pending: list[Command] = []
    for cmd in queue:
        when = cmd.activate_at if cmd.activate_at is not None else due_time
        if when <= due_time:
            apply_command(case, st.device, cmd)
        else:
            still_pending.append(cmd)
    st.pending = still_pending

    # 2. load profile, 3. controllers and ramping
    st.load_scale = profile.multiplier(st.sim_time, st.step_index)
    _auto_taps(case, st, cfg)
    _agc(case, st, cfg)
    _ramp(st.device, case, dt)

    # 4. solve with one-step-lagged GIC reactive losses
    spec = build_case_spec(
        case,
        branch_closed=st.device.branch_closed,
        taps=st.device.taps,
        shunt_on=st.device.shunt_on,
        shunt_q=st.device.shunt_q,
        gen_online=st.device.gen_online,
        gen_p_set=st.device.gen_p_set,
        gen_v_set=st.device.gen_v_set,
        gen_q_fixed=st.device.gen_q_fixed,
        load_served=st.device.load_served,
        load_closed=st.device.load_closed,
        load_scale=st.load_scale,
        extra_bus_q_mvar=st.gic_q_mvar if st.gic_q_mvar else None,
    )
    warm = None if state.collapsed else state.v_warm
    try:
        sol = solve_power_flow(case, spec=spec, options=cfg.pf_options, v0=warm)
        sol = enforce_q_limits(case, sol, cfg.pf_options)
        sol = compute_branch_flows(case, sol)
        sol = distribute_generation(case, sol)
        st.collapsed = False
        st.solution = sol
        st.v_warm = sol.v
    except PowerFlowDiverged:
        st.collapsed = True
        st.solution = None
        st.v_warm = None

    # 5. measurements, violations, score, cost, ace, gmd
    if st.collapsed:
        violations = ViolationSet(
            bus_voltage=[(b.id, 0.0, "under") for b in case.buses], branch_overload=[]
        )
        st.freq_dev = 0.0
        cost_rate = 0.0
        st.last_ace = {a.id: 0.0 for a in case.areas}
    else:
        violations = detect_violations(case, st.solution)
        st.freq_dev = -(st.solution.slack_p_mw - st.solution.slack_p_sched_mw) / cfg.beta_sys
        cost_rate = compute_cost_rate(case, st)
        st.last_ace = compute_ace(case, st)

    st.score = update_reliability(
        st.score, violations, dt, cfg.violation_weight_bus, cfg.violation_weight_branch
    )
    st.cost_accrued = st.cost_accrued + cost_rate * dt / 3600.0

    gmd_doc = None
    if gmd_event is not None and gic_net is not None:
        gmd_doc = gic_step(case, st, gmd_event, gic_net, cfg.gmd, dt)

    meas = _snapshot(case, st, violations, cost_rate, gmd_doc)
    return st, meas


def _snapshot(case, st: SimulationState, violations: ViolationSet, cost_rate: float, gmd_doc):
    n = len(case.buses)
    if st.collapsed or st.solution is None:
        vm = [0.0] * n
        va = [0.0] * n
        nb = len(case.branches)
        p_from = [0.0] * nb
        q_from = [0.0] * nb
        p_to = [0.0] * nb
        q_to = [0.0] * nb
        loading = [0.0] * nb
        ng = len(case.generators)
        gen_p, gen_q = [0.0] * ng, [0.0] * ng
    else:
        sol = st.solution
        vm = [float(x) for x in sol.vm]
        va = [float(x) for x in sol.va]
        p_from = [float(x) for x in sol.p_from_mw]
        q_from = [float(x) for x in sol.q_from_mvar]
        p_to = [float(x) for x in sol.p_to_mw]
        q_to = [float(x) for x in sol.q_to_mvar]
        loading = [float(x) for x in sol.loading_pct]
        gen_p = [float(x) for x in sol.gen_p_mw]
        gen_q = [float(x) for x in sol.gen_q_mvar]

    barea = bus_area_map(case)
    pos = case.bus_index()
    areas: dict[int, dict] = {}
    for j, a in enumerate(case.areas):
        gen_mw = sum(gen_p[jj] for jj, g in enumerate(case.generators) if barea[g.bus] == a.id)
        load_mw = 0.0
        if not st.collapsed and st.solution is not None:
            load_mw = sum(
                float(st.solution.spec.p_load[pos[b.id]]) for b in case.buses if barea[b.id] == a.id
            )
        areas[a.id] = {
            "gen_mw": gen_mw,
            "load_mw": load_mw,
            "export_mw": 0.0,
            "sched_export_mw": float(st.device.area_sched_export[j]),
            "freq_dev_hz": st.freq_dev,
            "ace_mw": st.last_ace.get(a.id, 0.0),
            "score": st.score,
            "cost_usd": st.cost_accrued,
            "blackout": st.collapsed,
            "agc_on": bool(st.device.area_agc[j]),
        }
    if not st.collapsed and st.solution is not None and st.solution.p_from_mw is not None:
        for k, br in enumerate(case.branches):
            fa, ta = barea[br.from_bus], barea[br.to_bus]
            if fa != ta:
                if fa in areas:
                    areas[fa]["export_mw"] += p_from[k]
                if ta in areas:
                    areas[ta]["export_mw"] += p_to[k]

    return Measurements(
        step_index=st.step_index,
        sim_time=st.sim_time,
        blackout=st.collapsed,
        bus_ids=[b.id for b in case.buses],
        v_pu=vm,
        angle_rad=va,
        branch_ids=[b.id for b in case.branches],
        p_from_mw=p_from,
        q_from_mvar=q_from,
        p_to_mw=p_to,
        q_to_mvar=q_to,
        loading_pct=loading,
        branch_closed=[bool(x) for x in st.device.branch_closed],
        gen_ids=[g.id for g in case.generators],
        gen_p_mw=gen_p,
        gen_q_mvar=gen_q,
        gen_online=[bool(x) for x in st.device.gen_online],
        gen_p_target_mw=[float(x) for x in st.device.gen_p_target],
        gen_v_set=[float(x) for x in st.device.gen_v_set],
        areas=areas,
        violations={
            "bus": [[b, v, kind] for b, v, kind in violations.bus_voltage],
            "branch": [[b, pct] for b, pct in violations.branch_overload],
        },
        score=st.score,
        cost_rate=cost_rate,
        cost_accrued=st.cost_accrued,
        freq_dev_hz=st.freq_dev,
        load_scale=st.load_scale,
        gmd=gmd_doc,
    )
