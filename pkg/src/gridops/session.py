"""Scenario loading, the wall-clock session loop, and deterministic replay.

A session advances the engine by dt_sim per step at a wall cadence of
dt_sim / timescale. Simulated time never depends on measured wall time:
when a step overruns its slot the following steps fire immediately until
the loop catches up, so the final simulated clock is exact by
construction. Every accepted command batch and every step's measurement
digest goes into the record, which is all replay needs to reproduce the
session (and its report) byte for byte.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .broker import Broker
from .commands import Command, CommandKind
from .encoding import canonical_json, digest
from .engine import EngineConfig, LoadProfile, Measurements, SimulationState, step
from .gateway import Gateway, Notification, TOPIC_NOTIF_ALARM, TOPIC_REPORT
from .gmd import FieldEvent, GicNetwork, build_dc_network
from .model import NetworkCase, parse_case_json
from .powerflow import PowerFlowOptions
from .rbac import Role, builtin_roles

logger = logging.getLogger(__name__)

RECORD_MAGIC = "GRIDSESSION"
RECORD_VERSION = 1


class ScenarioError(Exception):
    pass


class ReplayError(Exception):
    pass


def parse_clock(text) -> float:
    """'HH:MM:SS' (or a bare number of seconds) to seconds."""
    if isinstance(text, (int, float)):
        return float(text)
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ScenarioError(f"bad clock value {text!r}, expected HH:MM:SS")
    h, m, s = (float(p) for p in parts)
    return h * 3600.0 + m * 60.0 + s


def format_clock(seconds: float) -> str:
    total = int(round(seconds)) % 86400
    return f"{total // 3600:02d}:{(total % 3600) // 60:02d}:{total % 60:02d}"


@dataclass
class Scenario:
    name: str
    case: NetworkCase
    case_doc: dict
    sim_start: float              # seconds of day
    sim_span: float
    timescale: float
    dt_sim: float
    profile: LoadProfile
    gmd_event: Optional[FieldEvent]
    roles: dict[str, Role]
    tokens: dict[str, str]
    beta_sys: float
    rng_seed: int
    doc: dict

    @property
    def n_steps(self) -> int:
        return int(round(self.sim_span / self.dt_sim))

    def clock(self, sim_time: float) -> str:
        return format_clock(self.sim_start + sim_time)

    def content_digest(self) -> str:
        return digest({"scenario": _strip_case(self.doc), "case": self.case_doc})

    def engine_config(self) -> EngineConfig:
        return EngineConfig(dt_sim=self.dt_sim, beta_sys=self.beta_sys,
                            pf_options=PowerFlowOptions())


def _strip_case(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k != "case"}


def _parse_roles(doc: Optional[dict]) -> dict[str, Role]:
    roles = builtin_roles()
    if not doc:
        return roles
    for name, spec in doc.items():
        roles[name] = Role(
            name=name,
            command_grants={CommandKind(k) for k in spec.get("commands", [])},
            data_grants=list(spec.get("data", [])),
        )
    return roles


def load_scenario(text: str, base_dir: Optional[Path] = None,
                  case_doc: Optional[dict] = None) -> Scenario:
    """Parse and validate a scenario document.

    The case is taken from, in order: an embedded `case` object, the
    supplied case_doc, or the `case_ref` path resolved against base_dir.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario is not valid JSON: {e}") from None

    if case_doc is None:
        case_doc = doc.get("case")
    if case_doc is None:
        ref = doc.get("case_ref")
        if not ref:
            raise ScenarioError("scenario needs `case_ref` or an embedded `case`")
        path = (base_dir or Path(".")) / ref
        try:
            case_doc = json.loads(path.read_text())
        except OSError as e:
            raise ScenarioError(f"cannot read case {path}: {e}") from None
    case = parse_case_json(json.dumps(case_doc))

    timescale = float(doc.get("timescale", 60.0))
    dt_sim = float(doc.get("dt_sim", 2.0))
    sim_span = float(doc.get("sim_span", 600.0))
    if timescale <= 0:
        raise ScenarioError("timescale must be positive")
    if dt_sim <= 0:
        raise ScenarioError("dt_sim must be positive")
    if sim_span <= 0:
        raise ScenarioError("sim_span must be positive")
    if abs(sim_span / dt_sim - round(sim_span / dt_sim)) > 1e-9:
        raise ScenarioError("sim_span must be a whole number of dt_sim steps")

    sim_start = parse_clock(doc.get("sim_start", "00:00:00"))

    bps = doc.get("load_profile", [[0.0, 1.0]])
    breakpoints = [(float(t), float(m)) for t, m in bps]
    if breakpoints != sorted(breakpoints, key=lambda b: b[0]):
        raise ScenarioError("load_profile breakpoints must be sorted by time")
    seed = int(doc.get("rng_seed", 0))
    profile = LoadProfile(
        breakpoints=breakpoints,
        noise_sigma=float(doc.get("profile_noise_sigma", 0.0)),
        seed=seed,
    )

    gmd_event = None
    if doc.get("gmd_event"):
        g = doc["gmd_event"]
        onset = parse_clock(g["onset"])
        if isinstance(g["onset"], str):
            onset -= sim_start
        if onset < 0:
            raise ScenarioError("gmd onset precedes the scenario start")
        duration = float(g["duration"])
        if duration <= 0:
            raise ScenarioError("gmd duration must be positive")
        gmd_event = FieldEvent(
            onset=onset, duration=duration,
            waveform=[(float(t), float(en), float(ee)) for t, en, ee in g.get("waveform", [])],
        )

    return Scenario(
        name=str(doc.get("name", "scenario")),
        case=case,
        case_doc=case_doc,
        sim_start=sim_start,
        sim_span=sim_span,
        timescale=timescale,
        dt_sim=dt_sim,
        profile=profile,
        gmd_event=gmd_event,
        roles=_parse_roles(doc.get("roles")),
        tokens=dict(doc.get("tokens", {"token-instructor": "instructor"})),
        beta_sys=float(doc.get("beta_sys", 100.0)),
        rng_seed=seed,
        doc=doc,
    )


@dataclass
class SessionRecord:
    header: dict
    events: list[dict] = field(default_factory=list)
    report: Optional[dict] = None

    def append(self, event: dict) -> None:
        if self.events:
            last = self.events[-1].get("sim_time", 0.0)
            if event.get("sim_time", last) < last:
                raise ReplayError(
                    f"out-of-order event: {event.get('sim_time')} after {last}"
                )
        self.events.append(event)

    def to_text(self) -> str:
        lines = [canonical_json(self.header)]
        lines += [canonical_json(e) for e in self.events]
        if self.report is not None:
            lines.append(canonical_json({"type": "report", "report": self.report}))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "SessionRecord":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise ReplayError("empty record file")
        header = json.loads(lines[0])
        if header.get("magic") != RECORD_MAGIC:
            raise ReplayError("not a session record (bad magic)")
        if header.get("version") != RECORD_VERSION:
            raise ReplayError(f"unsupported record version {header.get('version')}")
        rec = cls(header=header)
        for line in lines[1:]:
            event = json.loads(line)
            if event.get("type") == "report":
                rec.report = event["report"]
            else:
                rec.events.append(event)
        return rec

    @classmethod
    def load(cls, path) -> "SessionRecord":
        return cls.from_text(Path(path).read_text())


def generate_report(record: SessionRecord) -> dict:
    """Build the downloadable report purely from recorded events."""
    times: list[float] = []
    clocks: list[str] = []
    scores: list[float] = []
    costs: list[float] = []
    ace: dict[str, list[float]] = {}
    actions: list[dict] = []
    violations: list[dict] = []
    open_violations: dict[tuple, dict] = {}
    blackout_steps = 0
    sim_start = record.header.get("sim_start", 0.0)

    for event in record.events:
        kind = event.get("type")
        if kind == "step":
            t = event["sim_time"]
            times.append(t)
            clocks.append(format_clock(sim_start + t))
            scores.append(event["score"])
            costs.append(event["cost_accrued"])
            for aid, val in event.get("ace", {}).items():
                ace.setdefault(aid, []).append(val)
            if event.get("blackout"):
                blackout_steps += 1
        elif kind == "action":
            actions.append(event)
        elif kind == "violation_edge":
            key = (event["element"], event["id"])
            if event["edge"] == "onset":
                entry = {"element": event["element"], "id": event["id"],
                         "onset": event["sim_time"], "clear": None}
                open_violations[key] = entry
                violations.append(entry)
            elif key in open_violations:
                open_violations.pop(key)["clear"] = event["sim_time"]

    final_score = scores[-1] if scores else 100.0
    total_cost = costs[-1] if costs else 0.0
    summary = (
        f"{record.header.get('scenario_name', 'session')}: "
        f"score {final_score:.2f}, cost ${total_cost:,.2f}, "
        f"{len(violations)} violations, {len(actions)} actions, "
        f"{blackout_steps} blackout steps"
    )
    return {
        "scenario_digest": record.header["scenario_digest"],
        "scenario_name": record.header.get("scenario_name", ""),
        "final_score": final_score,
        "total_cost_usd": total_cost,
        "series": {"sim_time": times, "clock": clocks, "score": scores,
                   "cost": costs, "ace": ace},
        "violation_log": violations,
        "action_log": actions,
        "summary": summary,
    }


def report_bytes(report: dict) -> bytes:
    return canonical_json(report).encode("utf-8")


class Session:
    """Owns one run: engine state, gateway wiring, record keeping."""

    def __init__(self, scenario: Scenario, broker: Optional[Broker] = None,
                 gateway: Optional[Gateway] = None):
        self.scenario = scenario
        self.broker = broker or Broker()
        self.gateway = gateway or Gateway(
            scenario.case, self.broker, scenario.roles, scenario.tokens,
            dt_sim=scenario.dt_sim, gmd_event=scenario.gmd_event,
        )
        self.gateway.report_provider = self.current_report
        self.gateway.publish_case_summary()
        self.config = scenario.engine_config()
        self.state = SimulationState.initial(scenario.case)
        self.gic_net: Optional[GicNetwork] = None
        if scenario.gmd_event is not None:
            self.gic_net = build_dc_network(scenario.case, strict=False)
        self.record = SessionRecord(header={
            "magic": RECORD_MAGIC,
            "version": RECORD_VERSION,
            "scenario_name": scenario.name,
            "scenario_digest": scenario.content_digest(),
            "sim_start": scenario.sim_start,
            "dt_sim": scenario.dt_sim,
            "timescale": scenario.timescale,
            "sim_span": scenario.sim_span,
            "rng_seed": scenario.rng_seed,
            "scenario": _strip_case(scenario.doc),
            "case": scenario.case_doc,
        })
        self._live_violations: set[tuple] = set()

    # -- single step --------------------------------------------------------

    def step_once(self, commands: list[Command]) -> Measurements:
        if commands:
            self.record.append({
                "type": "commands",
                "step": self.state.step_index + 1,
                "sim_time": self.state.sim_time,
                "commands": [c.to_doc() for c in commands],
            })
        self.state, meas = step(
            self.scenario.case, self.state, commands, self.scenario.profile,
            self.scenario.dt_sim, self.config,
            gmd_event=self.scenario.gmd_event, gic_net=self.gic_net,
        )
        self._record_step(meas)
        return meas

    def _record_step(self, meas: Measurements) -> None:
        t = meas.sim_time
        current = {("bus", row[0]) for row in meas.violations["bus"]}
        current |= {("branch", row[0]) for row in meas.violations["branch"]}
        for element, ident in sorted(current - self._live_violations):
            self.record.append({"type": "violation_edge", "element": element, "id": ident,
                                "edge": "onset", "sim_time": t})
        for element, ident in sorted(self._live_violations - current):
            self.record.append({"type": "violation_edge", "element": element, "id": ident,
                                "edge": "clear", "sim_time": t})
        self._live_violations = current
        self.record.append({
            "type": "step",
            "step": meas.step_index,
            "sim_time": t,
            "digest": meas.digest(),
            "score": meas.score,
            "cost_accrued": meas.cost_accrued,
            "cost_rate": meas.cost_rate,
            "blackout": meas.blackout,
            "ace": {str(k): v["ace_mw"] for k, v in sorted(meas.areas.items())},
            "n_violations": [len(meas.violations["bus"]), len(meas.violations["branch"])],
        })

    def record_action(self, action_doc: dict) -> None:
        self.record.append(action_doc)

    def current_report(self) -> dict:
        return generate_report(self.record)

    # -- the loop -----------------------------------------------------------

    def run(self, pacing: bool = True,
            on_step: Optional[Callable[[Measurements], None]] = None) -> SessionRecord:
        sc = self.scenario
        wall_dt = sc.dt_sim / sc.timescale
        t0 = time.monotonic()
        overruns = 0
        for k in range(1, sc.n_steps + 1):
            if pacing:
                deadline = t0 + k * wall_dt
                now = time.monotonic()
                if now < deadline:
                    time.sleep(deadline - now)
                elif now > deadline + wall_dt:
                    overruns += 1
            for action in self.gateway.drain_actions():
                self.record.append(action | {
                    "type": "action",
                    "sim_time": self.state.sim_time,
                    "step": self.state.step_index + 1,
                })
            commands = self.gateway.drain_commands()
            meas = self.step_once(commands)
            self.gateway.publish_measurements(meas)
            if on_step is not None:
                on_step(meas)
            if self.gateway.stop_requested:
                self.record.append({
                    "type": "stop", "sim_time": self.state.sim_time,
                    "step": self.state.step_index, "by": "instructor",
                })
                break
        if overruns:
            logger.warning("%d steps missed their wall slot (caught up by firing immediately)", overruns)
        return self.finalize()

    def finalize(self) -> SessionRecord:
        self.record.report = generate_report(self.record)
        note = Notification(
            severity="alarm",
            text=f"session complete: {self.record.report['summary']}",
            sim_time=self.state.sim_time,
            origin="session",
        ).to_doc()
        note["report"] = self.record.report
        self.gateway._publish(TOPIC_NOTIF_ALARM, note, self.state.sim_time, retain=False)
        self.gateway._publish(TOPIC_REPORT, self.record.report, self.state.sim_time, retain=True)
        return self.record


def replay(
    record: SessionRecord,
    broker: Optional[Broker] = None,
    speed=0.0,
    on_step: Optional[Callable[[Measurements], None]] = None,
) -> tuple[dict, SessionRecord]:
    """Re-execute a recorded session from its embedded scenario.

    speed is a wall-pacing multiplier for playback (0 = as fast as
    possible); it cannot change the outcome. Raises ReplayError on the
    first step whose regenerated measurement digest differs from the
    recorded one, or when the embedded scenario digest does not match.

    Returns (regenerated report, regenerated record).
    """
    header = record.header
    scenario = load_scenario(
        json.dumps(header["scenario"]), case_doc=header["case"]
    )
    fresh_digest = scenario.content_digest()
    if fresh_digest != header["scenario_digest"]:
        raise ReplayError(
            f"scenario digest mismatch: record has {header['scenario_digest']}, "
            f"loaded content gives {fresh_digest}"
        )

    batches: dict[int, list[Command]] = {}
    recorded_digests: dict[int, str] = {}
    recorded_actions: dict[int, list[dict]] = {}
    last_step = 0
    for event in record.events:
        if event["type"] == "commands":
            batches[event["step"]] = [Command.from_doc(d) for d in event["commands"]]
        elif event["type"] == "step":
            recorded_digests[event["step"]] = event["digest"]
            last_step = max(last_step, event["step"])
        elif event["type"] == "action":
            recorded_actions.setdefault(event["step"], []).append(event)

    session = Session(scenario, broker=broker)
    for k in range(1, last_step + 1):
        rate = speed() if callable(speed) else speed
        if rate and rate > 0:
            time.sleep((scenario.dt_sim / scenario.timescale) / rate)
        # action events are session inputs: carry them over verbatim so the
        # regenerated report's action log is identical to the original
        for action in recorded_actions.get(k, []):
            session.record.append(dict(action))
        cmds = batches.get(k, [])
        meas = session.step_once(cmds)
        session.gateway.publish_measurements(meas)
        if on_step is not None:
            on_step(meas)
        if meas.digest() != recorded_digests.get(k):
            raise ReplayError(
                f"measurement digest diverged from the record at step {k}"
            )
    new_record = session.finalize()
    return new_record.report, new_record
