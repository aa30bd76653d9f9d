"""Operator command taxonomy: the 21 control kinds, targets and value bounds."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .model import NetworkCase


class CommandKind(str, Enum):
    SET_GEN_MW = "SetGenMW"
    SET_GEN_VOLTAGE_SETPOINT = "SetGenVoltageSetpoint"
    SET_GEN_MVAR = "SetGenMvar"
    COMMIT_GEN = "CommitGen"
    DECOMMIT_GEN = "DecommitGen"
    OPEN_GEN_BREAKER = "OpenGenBreaker"
    CLOSE_GEN_BREAKER = "CloseGenBreaker"
    OPEN_BRANCH = "OpenBranch"
    CLOSE_BRANCH = "CloseBranch"
    OPEN_BRANCH_TIMED = "OpenBranchTimed"
    SET_TRANSFORMER_TAP = "SetTransformerTap"
    SET_TRANSFORMER_TAP_AUTO = "SetTransformerTapAuto"
    SWITCH_SHUNT_ON = "SwitchShuntOn"
    SWITCH_SHUNT_OFF = "SwitchShuntOff"
    SET_SHUNT_MVAR = "SetShuntMvar"
    SHED_LOAD_PERCENT = "ShedLoadPercent"
    RESTORE_LOAD_PERCENT = "RestoreLoadPercent"
    OPEN_LOAD_BREAKER = "OpenLoadBreaker"
    CLOSE_LOAD_BREAKER = "CloseLoadBreaker"
    SET_AREA_INTERCHANGE_SCHEDULE = "SetAreaInterchangeSchedule"
    TOGGLE_AREA_AGC = "ToggleAreaAGC"


GEN_KINDS = {
    CommandKind.SET_GEN_MW,
    CommandKind.SET_GEN_VOLTAGE_SETPOINT,
    CommandKind.SET_GEN_MVAR,
    CommandKind.COMMIT_GEN,
    CommandKind.DECOMMIT_GEN,
    CommandKind.OPEN_GEN_BREAKER,
    CommandKind.CLOSE_GEN_BREAKER,
}
BRANCH_KINDS = {
    CommandKind.OPEN_BRANCH,
    CommandKind.CLOSE_BRANCH,
    CommandKind.OPEN_BRANCH_TIMED,
    CommandKind.SET_TRANSFORMER_TAP,
    CommandKind.SET_TRANSFORMER_TAP_AUTO,
}
SHUNT_KINDS = {
    CommandKind.SWITCH_SHUNT_ON,
    CommandKind.SWITCH_SHUNT_OFF,
    CommandKind.SET_SHUNT_MVAR,
}
LOAD_KINDS = {
    CommandKind.SHED_LOAD_PERCENT,
    CommandKind.RESTORE_LOAD_PERCENT,
    CommandKind.OPEN_LOAD_BREAKER,
    CommandKind.CLOSE_LOAD_BREAKER,
}
AREA_KINDS = {
    CommandKind.SET_AREA_INTERCHANGE_SCHEDULE,
    CommandKind.TOGGLE_AREA_AGC,
}

TARGET_COLLECTION = {}
for _k in GEN_KINDS:
    TARGET_COLLECTION[_k] = "generator"
for _k in BRANCH_KINDS:
    TARGET_COLLECTION[_k] = "branch"
for _k in SHUNT_KINDS:
    TARGET_COLLECTION[_k] = "shunt"
for _k in LOAD_KINDS:
    TARGET_COLLECTION[_k] = "load"
for _k in AREA_KINDS:
    TARGET_COLLECTION[_k] = "area"

# kinds whose value field is required (value-less kinds ignore it)
VALUE_KINDS = {
    CommandKind.SET_GEN_MW,
    CommandKind.SET_GEN_VOLTAGE_SETPOINT,
    CommandKind.SET_GEN_MVAR,
    CommandKind.SET_TRANSFORMER_TAP,
    CommandKind.SET_TRANSFORMER_TAP_AUTO,
    CommandKind.SET_SHUNT_MVAR,
    CommandKind.SHED_LOAD_PERCENT,
    CommandKind.RESTORE_LOAD_PERCENT,
    CommandKind.SET_AREA_INTERCHANGE_SCHEDULE,
    CommandKind.TOGGLE_AREA_AGC,
}

SHUNT_MVAR_BOUND = 500.0
INTERCHANGE_BOUND = 10000.0


@dataclass
class Command:
    """One operator control action as accepted by the gateway."""

    id: str
    issuer: str
    role: str
    kind: CommandKind
    target: int
    value: Optional[float] = None
    activate_at: Optional[float] = None  # sim seconds; None means next step
    duration: Optional[float] = None
    seq: int = 0

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "issuer": self.issuer,
            "role": self.role,
            "kind": self.kind.value,
            "target": self.target,
            "value": self.value,
            "activate_at": self.activate_at,
            "duration": self.duration,
            "seq": self.seq,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Command":
        return cls(
            id=str(doc["id"]),
            issuer=str(doc.get("issuer", "")),
            role=str(doc.get("role", "")),
            kind=CommandKind(doc["kind"]),
            target=int(doc["target"]),
            value=None if doc.get("value") is None else float(doc["value"]),
            activate_at=None if doc.get("activate_at") is None else float(doc["activate_at"]),
            duration=None if doc.get("duration") is None else float(doc["duration"]),
            seq=int(doc.get("seq", 0)),
        )


def validate_command(case: NetworkCase, cmd: Command) -> Optional[str]:
    """Bounds and referential check. Returns a rejection reason or None.

    Role permission is a separate concern (rbac.authorize); this only
    answers whether the command makes sense against the case.
    """
    collection = TARGET_COLLECTION[cmd.kind]
    elem = case.element(collection, cmd.target)
    if elem is None:
        return f"{collection} {cmd.target} does not exist"

    if cmd.kind in VALUE_KINDS and cmd.value is None:
        return f"{cmd.kind.value} requires a value"
    v = cmd.value

    if cmd.kind == CommandKind.SET_GEN_MW:
        if not (elem.p_min <= v <= elem.p_max):
            return f"MW setpoint {v} outside [{elem.p_min}, {elem.p_max}]"
    elif cmd.kind == CommandKind.SET_GEN_VOLTAGE_SETPOINT:
        if not (0.9 <= v <= 1.1):
            return f"voltage setpoint {v} outside [0.9, 1.1]"
    elif cmd.kind == CommandKind.SET_GEN_MVAR:
        if not (elem.q_min <= v <= elem.q_max):
            return f"Mvar setpoint {v} outside [{elem.q_min}, {elem.q_max}]"
    elif cmd.kind == CommandKind.SET_TRANSFORMER_TAP:
        if not elem.is_transformer:
            return f"branch {cmd.target} is not a transformer"
        if not (elem.tap_min <= v <= elem.tap_max):
            return f"tap {v} outside [{elem.tap_min}, {elem.tap_max}]"
    elif cmd.kind == CommandKind.SET_TRANSFORMER_TAP_AUTO:
        if not elem.is_transformer:
            return f"branch {cmd.target} is not a transformer"
        if v not in (0.0, 1.0):
            return "tap auto flag must be 0 or 1"
    elif cmd.kind == CommandKind.SET_SHUNT_MVAR:
        if abs(v) > SHUNT_MVAR_BOUND:
            return f"shunt size {v} outside +-{SHUNT_MVAR_BOUND} Mvar"
    elif cmd.kind in (CommandKind.SHED_LOAD_PERCENT, CommandKind.RESTORE_LOAD_PERCENT):
        if not (0.0 <= v <= 100.0):
            return f"percent {v} outside [0, 100]"
    elif cmd.kind == CommandKind.SET_AREA_INTERCHANGE_SCHEDULE:
        if abs(v) > INTERCHANGE_BOUND:
            return f"schedule {v} outside +-{INTERCHANGE_BOUND} MW"
    elif cmd.kind == CommandKind.TOGGLE_AREA_AGC:
        if v not in (0.0, 1.0):
            return "AGC flag must be 0 or 1"
    elif cmd.kind == CommandKind.OPEN_BRANCH_TIMED:
        if cmd.duration is None or cmd.duration <= 0:
            return "timed open requires duration > 0"
    return None
