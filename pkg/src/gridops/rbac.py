"""Role-based authorization for operator commands and data visibility.

Deny by default: a role can do exactly what its grants list, nothing else.
A command of a kind outside the role's grant is not just denied but
flagged suspicious; a mere bounds problem on a granted kind is an
ordinary denial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .broker import topic_matches
from .commands import (
    AREA_KINDS,
    BRANCH_KINDS,
    Command,
    CommandKind,
    GEN_KINDS,
    validate_command,
)
from .model import NetworkCase


@dataclass
class Role:
    name: str
    command_grants: set[CommandKind] = field(default_factory=set)
    data_grants: list[str] = field(default_factory=list)

    def allows_topic(self, topic: str) -> bool:
        return any(topic_matches(p, topic) for p in self.data_grants)


@dataclass
class AuthDecision:
    allowed: bool
    reason: str = ""
    suspicious: bool = False

    def __bool__(self) -> bool:
        return self.allowed


ALLOW = AuthDecision(allowed=True)


def authorize(role: Role, cmd: Command, case: Optional[NetworkCase] = None) -> AuthDecision:
    """Grant check first (suspicious on failure), then value bounds."""
    if cmd.kind not in role.command_grants:
        return AuthDecision(
            allowed=False,
            reason=f"role {role.name!r} is not permitted to issue {cmd.kind.value}",
            suspicious=True,
        )
    if case is not None:
        problem = validate_command(case, cmd)
        if problem:
            return AuthDecision(allowed=False, reason=problem, suspicious=False)
    return ALLOW


def builtin_roles() -> dict[str, Role]:
    """The stock training roles; scenarios may override or extend these."""
    voltage_support_kinds = {
        CommandKind.SWITCH_SHUNT_ON,
        CommandKind.SWITCH_SHUNT_OFF,
        CommandKind.SET_SHUNT_MVAR,
        CommandKind.SET_TRANSFORMER_TAP,
        CommandKind.SET_TRANSFORMER_TAP_AUTO,
        CommandKind.OPEN_LOAD_BREAKER,
        CommandKind.CLOSE_LOAD_BREAKER,
        # deliberately NOT ShedLoadPercent: load shedding belongs to other desks
    }
    return {
        "overview": Role(
            name="overview",
            command_grants=set(AREA_KINDS),
            data_grants=["data/#", "notif/#"],
        ),
        "generation": Role(
            name="generation",
            command_grants=set(GEN_KINDS) | set(BRANCH_KINDS),
            data_grants=["data/#", "notif/#"],
        ),
        "voltage_support": Role(
            name="voltage_support",
            command_grants=voltage_support_kinds,
            data_grants=["data/#", "notif/#"],
        ),
        "instructor": Role(
            name="instructor",
            command_grants=set(CommandKind),
            data_grants=["#"],
        ),
    }
