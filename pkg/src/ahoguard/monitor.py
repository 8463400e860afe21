"""Reference monitor: the single path through which any AHO or device state changes."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterator, Union

from .errors import InvalidValue
from .events import StateChanged
from .model import AttributeValue, Home, Principal, PrincipalKind, TrustClass
from .policy import Action, Decision, PolicyEngine
from .state import StateMachine


@dataclass(frozen=True)
class AhoChange:
    aho: str
    new_value: str

    def __str__(self) -> str:
        return f"aho:{self.aho}={self.new_value}"


@dataclass(frozen=True)
class DeviceAttributeChange:
    device_id: str
    attribute: str
    value: AttributeValue

    def __str__(self) -> str:
        return f"device:{self.device_id}.{self.attribute}={self.value}"


@dataclass(frozen=True)
class DeviceReport:
    device_id: str
    attribute: str
    value: AttributeValue

    def __str__(self) -> str:
        return f"report:{self.device_id}.{self.attribute}={self.value}"


Target = Union[AhoChange, DeviceAttributeChange, DeviceReport]


@dataclass(frozen=True)
class StateChangeRequest:
    principal: Principal
    target: Target
    request_time: int

    def __post_init__(self) -> None:
        if isinstance(self.target, DeviceReport):
            p = self.principal
            if p.kind is not PrincipalKind.DEVICE_REPORT or p.device_id != self.target.device_id:
                raise ValueError("device reports must come from the reporting device")


class MediationStatus(str, enum.Enum):
    APPLIED = "APPLIED"
    DENIED_PERMISSION = "DENIED_PERMISSION"
    DENIED_ENDORSEMENT = "DENIED_ENDORSEMENT"
    DENIED_TAMPER = "DENIED_TAMPER"


@dataclass(frozen=True)
class Notification:
    seq: int
    time: int
    kind: str
    aho: str | None
    value: str | None
    message: str
    principal: str | None = None
    failed_checks: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "time": self.time,
            "kind": self.kind,
            "aho": self.aho,
            "value": self.value,
            "principal": self.principal,
            "failed_checks": list(self.failed_checks),
            "message": self.message,
        }


class NotificationChannel:
    """Append-only user channel. There is deliberately no way to remove entries."""

    def __init__(self) -> None:
        self._items: list[Notification] = []

    def append(self, **fields) -> Notification:
        n = Notification(seq=len(self._items) + 1, **fields)
        self._items.append(n)
        return n

    def __iter__(self) -> Iterator[Notification]:
        return iter(tuple(self._items))

    def __len__(self) -> int:
        return len(self._items)

    def items(self) -> tuple[Notification, ...]:
        return tuple(self._items)


@dataclass(frozen=True)
class MediationOutcome:
    status: MediationStatus
    decision: Decision | None = None
    notification: Notification | None = None
    reason: str | None = None

    @property
    def applied(self) -> bool:
        return self.status is MediationStatus.APPLIED


def notify(channel: NotificationChannel, denial: Decision, req: StateChangeRequest) -> Notification:
    if denial.action is not Action.DENY:
        raise ValueError("only denials are notified")
    target = req.target
    aho = getattr(target, "aho", None)
    value = getattr(target, "new_value", None)
    failed = tuple(denial.failed_checks())
    msg = f"denied {target} requested by {req.principal}"
    if denial.reason:
        msg += f" ({denial.reason})"
    return channel.append(time=req.request_time, kind="denial", aho=aho, value=value, message=msg,
                          principal=str(req.principal), failed_checks=failed)


@dataclass
class AuditRecord:
    seq: int
    time: int
    principal: str
    target: str
    status: str
    evidence: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


class ReferenceMonitor:
    """Mediates every state-change request.

    With ``endorsement_enabled`` False the monitor still mediates permission
    and tamper rules but never runs endorsement (benchmark baseline).
    """

    def __init__(self, home: Home, state: StateMachine, engine: PolicyEngine,
                 channel: NotificationChannel | None = None, endorsement_enabled: bool = True,
                 keep_audit: bool = True, use_current_state: bool = False):
        self.home = home
        self.state = state
        self.engine = engine
        self.channel = channel if channel is not None else NotificationChannel()
        self.endorsement_enabled = endorsement_enabled
        self.keep_audit = keep_audit
        # ablation only: judge by current device state instead of the most recent change
        self.use_current_state = use_current_state
        self.audit: list[AuditRecord] = []
        self.mutations = 0
        self.applied = 0
        self._seq = 0

    # -- entry point -------------------------------------------------------

    def mediate(self, req: StateChangeRequest) -> MediationOutcome:
        target = req.target
        if isinstance(target, DeviceReport):
            out = self._device_report(req, target)
        elif isinstance(target, DeviceAttributeChange):
            out = self._device_write(req, target)
        elif isinstance(target, AhoChange):
            out = self._aho_write(req, target)
        else:
            raise TypeError(f"unknown target {target!r}")
        if out.applied:
            self.applied += 1
        if self.keep_audit:
            self._seq += 1
            evidence = list(out.decision.failed_checks()) if out.decision else []
            if out.reason:
                evidence.insert(0, out.reason)
            self.audit.append(AuditRecord(self._seq, req.request_time, str(req.principal), str(target),
                                          out.status.value, evidence))
        return out

    # -- rules -------------------------------------------------------------

    def _device_report(self, req: StateChangeRequest, t: DeviceReport) -> MediationOutcome:
        if t.device_id not in self.home.devices:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason="unknown_device")
        self._record(t.device_id, t.attribute, t.value, req.request_time, trusted=True)
        return MediationOutcome(MediationStatus.APPLIED)

    def _device_write(self, req: StateChangeRequest, t: DeviceAttributeChange) -> MediationOutcome:
        dev = self.home.devices.get(t.device_id)
        if dev is None:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason="unknown_device")
        attrs = self.home.catalog.attributes_of(dev.device_type)
        spec = attrs.get(t.attribute)
        if spec is None:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason="unknown_attribute")
        if t.value not in spec.value_domain:
            raise InvalidValue(f"{spec.pair}: {t.value} not in domain")
        p = req.principal
        if p.kind is PrincipalKind.DEVICE_REPORT:
            if p.device_id != t.device_id:
                return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason="foreign_device")
            self._record(t.device_id, t.attribute, t.value, req.request_time, trusted=True)
            return MediationOutcome(MediationStatus.APPLIED)
        if spec.trust_class is TrustClass.READ_ONLY:
            return MediationOutcome(MediationStatus.DENIED_TAMPER, reason="read_only_attribute")
        if p.kind is PrincipalKind.THIRD_PARTY:
            if spec.trust_class is TrustClass.DESIGNATED:
                return MediationOutcome(MediationStatus.DENIED_TAMPER, reason="designated_attribute")
            token = self.home.tokens.get(p.token)
            if token is None or not token.may_write_device(t.device_id, t.attribute):
                return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason="no_grant")
        # API-written values never count as endorsement evidence
        self._record(t.device_id, t.attribute, t.value, req.request_time, trusted=False)
        return MediationOutcome(MediationStatus.APPLIED)

    def _aho_write(self, req: StateChangeRequest, t: AhoChange) -> MediationOutcome:
        aho = self.home.ahos.get(t.aho)
        if aho is None:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason="unknown_aho")
        if t.new_value not in aho.values:
            raise InvalidValue(f"{t.aho}: {t.new_value!r} not in {aho.values}")
        p = req.principal
        if p.kind in (PrincipalKind.PLATFORM_APP, PrincipalKind.LOCAL_USER):
            self._set_aho(t.aho, t.new_value, req.request_time)
            return MediationOutcome(MediationStatus.APPLIED)
        if p.kind is not PrincipalKind.THIRD_PARTY or p.token not in aho.grants:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason="no_grant")
        if not (self.endorsement_enabled and aho.endorsed and self.engine.guards(t.aho, t.new_value)):
            self._set_aho(t.aho, t.new_value, req.request_time)
            return MediationOutcome(MediationStatus.APPLIED)
        policy = self.engine.policy_for(t.aho, t.new_value)
        if policy is None:
            decision = Decision(Action.DENY, reason="unprotectable")
        else:
            decision = self.engine.evaluate(policy, self.state.snapshot(req.request_time), self.use_current_state)
        if decision.allowed:
            self._set_aho(t.aho, t.new_value, req.request_time)
            return MediationOutcome(MediationStatus.APPLIED, decision)
        note = notify(self.channel, decision, req)
        return MediationOutcome(MediationStatus.DENIED_ENDORSEMENT, decision, note)

    # -- mutation primitives (only reachable from mediate) -----------------

    def _record(self, device_id: str, attribute: str, value: AttributeValue, ts: int, trusted: bool) -> None:
        self.state.record_change(device_id, attribute, value, ts, trusted=trusted)
        self.mutations += 1

    def _set_aho(self, name: str, value: str, ts: int) -> None:
        aho = self.home.ahos[name]
        previous, aho.value = aho.value, value
        self.mutations += 1
        self.home.bus.publish(StateChanged(None, name, value, previous, ts, previous != value))

    def audit_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.audit)
