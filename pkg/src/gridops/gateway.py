"""Server-side gateway between the engine and the message bus.

Publishes each step's measurements onto the retained data topics, takes
operator commands in from `command/...` topics under role authorization,
queues the accepted ones for the engine's next step, and broadcasts
notifications (command outcomes, alarms) to everyone who may hear them.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .broker import Broker, Envelope, Subscription
from .commands import Command, CommandKind
from .engine import Measurements
from .gmd import FieldEvent
from .model import NetworkCase
from .rbac import AuthDecision, Role, authorize

logger = logging.getLogger(__name__)

TOPIC_CASE = "data/case"
TOPIC_AREA = "data/area/{id}"
TOPIC_BUS = "data/bus/all"
TOPIC_STRIP = "data/bus/strip"
STRIP_WINDOW_S = 60.0
STRIP_KEY_BUSES = 5
TOPIC_BRANCH = "data/branch/all"
TOPIC_GEN = "data/gen/all"
TOPIC_VIOLATIONS = "data/violations"
TOPIC_GMD_CONTOUR = "data/gmd/contour"
TOPIC_GMD_XFMR = "data/gmd/transformers"
TOPIC_REPORT = "data/report"
TOPIC_NOTIF_COMMAND = "notif/command"
TOPIC_NOTIF_ALARM = "notif/alarm"

COMMAND_ACTION = "command/action"
COMMAND_REPORT_FETCH = "command/report/fetch"
COMMAND_SESSION_STOP = "command/session/stop"
COMMAND_REPLAY_SPEED = "command/replay/speed"


@dataclass
class Notification:
    severity: str   # info | warning | alarm
    text: str
    sim_time: float
    origin: str = ""

    def to_doc(self) -> dict:
        return {
            "severity": self.severity,
            "text": self.text,
            "sim_time": self.sim_time,
            "origin": self.origin,
        }


class FilteredSubscription:
    """Role-scoped view of a broker subscription: ungrated topics vanish."""

    def __init__(self, sub: Subscription, role: Role):
        self.sub = sub
        self.role = role

    @property
    def pattern(self) -> str:
        return self.sub.pattern

    @property
    def alive(self) -> bool:
        return self.sub.alive

    def get(self, timeout: Optional[float] = None) -> Optional[Envelope]:
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            remaining = None if deadline is None else max(0.0, deadline - time.monotonic())
            env = self.sub.get(timeout=remaining)
            if env is None:
                return None
            if self.role.allows_topic(env.topic):
                return env
            # silently suppressed; keep draining within the deadline
            if deadline is not None and time.monotonic() >= deadline:
                return None

    def drain(self) -> list[Envelope]:
        return [e for e in self.sub.drain() if self.role.allows_topic(e.topic)]


class ClientSession:
    def __init__(self, gateway: "Gateway", client_id: str, role: Role):
        self.gateway = gateway
        self.client_id = client_id
        self.role = role
        self.subscriptions: dict[str, FilteredSubscription] = {}

    def subscribe(self, pattern: str) -> FilteredSubscription:
        sub = self.gateway.broker.subscribe(self.client_id, pattern)
        fsub = FilteredSubscription(sub, self.role)
        self.subscriptions[pattern] = fsub
        return fsub

    def unsubscribe(self, pattern: str) -> None:
        fsub = self.subscriptions.pop(pattern, None)
        if fsub:
            self.gateway.broker.unsubscribe(fsub.sub)

    def close(self) -> None:
        for pattern in list(self.subscriptions):
            self.unsubscribe(pattern)


class Gateway:
    def __init__(
        self,
        case: NetworkCase,
        broker: Broker,
        roles: dict[str, Role],
        tokens: dict[str, str],
        dt_sim: float = 2.0,
        gmd_event: Optional[FieldEvent] = None,
        phasor_sink: Optional[Callable[[Measurements], None]] = None,
    ):
        self.case = case
        self.broker = broker
        self.roles = roles
        self.tokens = tokens
        self.dt_sim = dt_sim
        self.gmd_event = gmd_event
        self.phasor_sink = phasor_sink
        self.report_provider: Optional[Callable[[], dict]] = None
        self.speed_callback: Optional[Callable[[float], None]] = None
        self.stop_requested = False

        self._lock = threading.RLock()
        self._seq = 0
        self._cmd_counter = 0
        self._queue: list[Command] = []
        self._actions: list[dict] = []
        self._sim_time = 0.0
        self._seen_violations: set = set()
        self._was_blackout = False
        self._gmd_announced = False
        self._strip: dict[int, list[tuple[float, float]]] = {}
        broker._on_overflow = self._on_overflow

    # -- publishing ---------------------------------------------------------

    def _publish(self, topic: str, payload: dict, sim_ts: float, retain: bool) -> None:
        # seq assignment and the broker hand-off stay under one lock so the
        # per-publisher monotonic order can never be violated by a race
        with self._lock:
            self._seq += 1
            env = Envelope(
                topic=topic, seq=self._seq, wall_ts=time.time(), sim_ts=sim_ts,
                retain=retain, payload=payload, publisher="gateway",
            )
            self.broker.publish(env)

    def emit_notification(self, n: Notification, topic: str = TOPIC_NOTIF_ALARM) -> None:
        self._publish(topic, n.to_doc(), n.sim_time, retain=False)

    def publish_case_summary(self) -> None:
        """Static grid geometry and element inventory for map-style clients."""
        case = self.case
        sub_of_bus = {b.id: b.substation_id for b in case.buses}
        doc = {
            "base_mva": case.base_mva,
            "substations": [
                {"id": s.id, "name": s.name, "lat": s.latitude, "lon": s.longitude,
                 "bus_ids": s.bus_ids}
                for s in case.substations
            ],
            "areas": [
                {"id": a.id, "name": a.name, "substation_ids": a.substation_ids}
                for a in case.areas
            ],
            "buses": [
                {"id": b.id, "name": b.name, "base_kv": b.base_kv, "type": b.type.value,
                 "v_min": b.v_min, "v_max": b.v_max, "substation_id": b.substation_id}
                for b in case.buses
            ],
            "branches": [
                {"id": br.id, "from_bus": br.from_bus, "to_bus": br.to_bus,
                 "from_sub": sub_of_bus[br.from_bus], "to_sub": sub_of_bus[br.to_bus],
                 "is_transformer": br.is_transformer, "mva_limit": br.mva_limit,
                 "tap_min": br.tap_min, "tap_max": br.tap_max}
                for br in case.branches
            ],
            "generators": [
                {"id": g.id, "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max,
                 "q_min": g.q_min, "q_max": g.q_max}
                for g in case.generators
            ],
            "loads": [
                {"id": l.id, "bus": l.bus, "p_nominal": l.p_nominal,
                 "q_nominal": l.q_nominal}
                for l in case.loads
            ],
            "shunts": [
                {"id": s.id, "bus": s.bus, "q_nominal": s.q_nominal}
                for s in case.shunts
            ],
        }
        self._publish(TOPIC_CASE, doc, 0.0, retain=True)

    def publish_measurements(self, m: Measurements) -> None:
        """One step's envelopes, all retained, all stamped with the step's sim time."""
        t = m.sim_time
        self._sim_time = t

        if self.gmd_event is not None and not self._gmd_announced and t >= self.gmd_event.onset:
            self._gmd_announced = True
            self.emit_notification(Notification(
                severity="alarm",
                text="extreme geomagnetic storm alarm: surface field event in progress",
                sim_time=self.gmd_event.onset,
                origin="gmd",
            ))

        if m.blackout and not self._was_blackout:
            self.emit_notification(Notification(
                severity="alarm", text="power flow collapsed: system blackout",
                sim_time=t, origin="engine",
            ))
        self._was_blackout = m.blackout

        current = {("bus", row[0]) for row in m.violations["bus"]}
        current |= {("branch", row[0]) for row in m.violations["branch"]}
        for key in sorted(current - self._seen_violations):
            kind, ident = key
            self.emit_notification(Notification(
                severity="alarm",
                text=f"new {kind} violation at {kind} {ident}",
                sim_time=t, origin="violations",
            ))
        self._seen_violations = current

        for area_id, block in m.areas.items():
            self._publish(TOPIC_AREA.format(id=area_id), block, t, retain=True)
        self._publish(TOPIC_BUS, {"ids": m.bus_ids, "v_pu": m.v_pu, "angle_rad": m.angle_rad},
                      t, retain=True)
        # server-held strip window: a resyncing console reproduces the
        # chart exactly instead of losing its history
        for bus_id, v in zip(m.bus_ids[:STRIP_KEY_BUSES], m.v_pu[:STRIP_KEY_BUSES]):
            ring = self._strip.setdefault(bus_id, [])
            ring.append((t, v))
            while ring and ring[0][0] <= t - STRIP_WINDOW_S:
                ring.pop(0)
        self._publish(TOPIC_STRIP, {
            "window_s": STRIP_WINDOW_S,
            "buses": [{"id": bus_id, "t": [p[0] for p in ring], "v": [p[1] for p in ring]}
                      for bus_id, ring in sorted(self._strip.items())],
        }, t, retain=True)
        self._publish(TOPIC_BRANCH, {
            "ids": m.branch_ids, "p_from_mw": m.p_from_mw, "q_from_mvar": m.q_from_mvar,
            "p_to_mw": m.p_to_mw, "q_to_mvar": m.q_to_mvar,
            "loading_pct": m.loading_pct, "closed": m.branch_closed,
        }, t, retain=True)
        self._publish(TOPIC_GEN, {
            "ids": m.gen_ids, "p_mw": m.gen_p_mw, "q_mvar": m.gen_q_mvar,
            "online": m.gen_online, "p_target_mw": m.gen_p_target_mw, "v_set": m.gen_v_set,
        }, t, retain=True)
        self._publish(TOPIC_VIOLATIONS, m.violations, t, retain=True)
        if m.gmd is not None:
            self._publish(TOPIC_GMD_CONTOUR, m.gmd["contour"] | {"field": m.gmd["field"]},
                          t, retain=True)
            self._publish(TOPIC_GMD_XFMR, {
                "transformers": m.gmd["transformers"], "neutrals": m.gmd["neutrals"],
            }, t, retain=True)
        if self.phasor_sink is not None:
            self.phasor_sink(m)

    # -- command intake -----------------------------------------------------

    def attach_client(self, client_id: str, token: str) -> ClientSession:
        role_name = self.tokens.get(token)
        if role_name is None or role_name not in self.roles:
            raise PermissionError("unknown token")
        return ClientSession(self, client_id, self.roles[role_name])

    def handle_client_envelope(self, session: ClientSession, doc: dict) -> None:
        """One client-to-server frame; only command topics are legal."""
        topic = str(doc.get("topic", ""))
        if not topic.startswith("command/"):
            raise PermissionError(f"clients may only publish on command topics, not {topic!r}")
        payload = doc.get("payload") or {}
        if topic == COMMAND_REPORT_FETCH:
            report = self.report_provider() if self.report_provider else {}
            self._publish(TOPIC_REPORT, report, self._sim_time, retain=True)
            return
        if topic == COMMAND_SESSION_STOP:
            if session.role.name != "instructor":
                self._notify_command_outcome(
                    None, session, "session stop", AuthDecision(False, "instructor only", True)
                )
                return
            self.stop_requested = True
            self.emit_notification(Notification(
                severity="info", text=f"session stop requested by {session.client_id}",
                sim_time=self._sim_time, origin="session",
            ))
            return
        if topic == COMMAND_REPLAY_SPEED:
            if self.speed_callback:
                self.speed_callback(float(payload.get("speed", 1.0)))
            return
        if topic != COMMAND_ACTION:
            raise PermissionError(f"unknown command topic {topic!r}")
        self.submit_command(session, payload)

    def submit_command(self, session: ClientSession, payload: dict) -> AuthDecision:
        """Validate, authorize and queue one operator action."""
        try:
            with self._lock:
                self._cmd_counter += 1
                counter = self._cmd_counter
            cmd = Command.from_doc(payload | {
                "id": payload.get("id") or f"c{counter}",
                "issuer": session.client_id,
                "role": session.role.name,
                "seq": counter,
            })
        except (KeyError, ValueError) as e:
            decision = AuthDecision(False, f"malformed command: {e}", False)
            self._notify_command_outcome(None, session, str(payload.get("kind")), decision)
            return decision

        decision = authorize(session.role, cmd, self.case)
        if decision.allowed:
            self._enqueue(cmd)
        with self._lock:
            self._actions.append({
                "command": cmd.to_doc(),
                "outcome": "accepted" if decision.allowed else "denied",
                "reason": decision.reason,
                "suspicious": decision.suspicious,
            })
        self._notify_command_outcome(cmd, session, cmd.kind.value, decision)
        return decision

    def _enqueue(self, cmd: Command) -> None:
        # past activations snap to the next step
        if cmd.activate_at is not None and cmd.activate_at <= self._sim_time:
            cmd.activate_at = None
        if cmd.kind == CommandKind.OPEN_BRANCH_TIMED:
            base = cmd.activate_at if cmd.activate_at is not None else self._sim_time
            revert_at = base + max(cmd.duration or 0.0, self.dt_sim)
            with self._lock:
                self._cmd_counter += 1
                revert = Command(
                    id=f"{cmd.id}-revert", issuer=cmd.issuer, role=cmd.role,
                    kind=CommandKind.CLOSE_BRANCH, target=cmd.target,
                    activate_at=revert_at, seq=self._cmd_counter,
                )
        else:
            revert = None
        with self._lock:
            self._queue.append(cmd)
            if revert is not None:
                self._queue.append(revert)

    def _notify_command_outcome(self, cmd: Optional[Command], session: ClientSession,
                                kind: str, decision: AuthDecision) -> None:
        target = cmd.target if cmd else "?"
        if decision.allowed:
            text = f"{session.client_id} ({session.role.name}): {kind} on {target} accepted"
            if cmd is not None and cmd.kind == CommandKind.OPEN_BRANCH_TIMED \
                    and (cmd.duration or 0.0) < self.dt_sim:
                text += f" (duration rounded up to one {self.dt_sim} s step)"
        else:
            text = f"{session.client_id} ({session.role.name}): {kind} on {target} denied: {decision.reason}"
            if decision.suspicious:
                text += " [flagged suspicious]"
        payload = Notification(
            severity="info", text=text, sim_time=self._sim_time,
            origin=cmd.id if cmd else "",
        ).to_doc()
        payload["outcome"] = {
            "allowed": decision.allowed,
            "reason": decision.reason,
            "suspicious": decision.suspicious,
            "kind": kind,
            "issuer": session.client_id,
            "target": target,
        }
        self._publish(TOPIC_NOTIF_COMMAND, payload, self._sim_time, retain=False)

    def drain_commands(self) -> list[Command]:
        """Hand everything queued to the engine; called at step boundaries."""
        with self._lock:
            out, self._queue = self._queue, []
            return out

    def drain_actions(self) -> list[dict]:
        """Submitted-command outcomes (accepted and denied) since last drain."""
        with self._lock:
            out, self._actions = self._actions, []
            return out

    # -- housekeeping -------------------------------------------------------

    def _on_overflow(self, sub) -> None:
        self.emit_notification(Notification(
            severity="warning",
            text=f"subscriber {sub.client} on {sub.pattern!r} disconnected: queue overflow",
            sim_time=self._sim_time, origin="broker",
        ))
