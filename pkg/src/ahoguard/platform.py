"""Smart-home platform simulator.

Wires the home registry, state machine, policy engine and reference monitor
together, and adds the pieces around them: a logical clock, physical device
interactions with scheduled sensor resets, and trigger-action routines.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CascadeDepthExceeded, ConfigError, DeviceOffline, InvalidValue, UnknownVerb
from .events import EventBus, StateChanged
from .model import Aho, ApiToken, AttributeValue, DeviceCatalog, DeviceInstance, Home, Principal
from .monitor import (
    AhoChange,
    DeviceAttributeChange,
    DeviceReport,
    MediationOutcome,
    NotificationChannel,
    ReferenceMonitor,
    StateChangeRequest,
)
from .policy import PolicyEngine, PolicyTemplate, load_templates
from .state import DEFAULT_THRESHOLD_MS, FreshnessConfig, StateMachine

log = logging.getLogger(__name__)

DEFAULT_RESET_DELAY_MS = 10_000
MAX_CASCADE_DEPTH = 16


class Clock:
    """Logical millisecond clock; never moves backwards."""

    def __init__(self, start: int = 0) -> None:
        self._now = start

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> int:
        if t < self._now:
            raise ValueError(f"clock cannot move backwards ({t} < {self._now})")
        self._now = t
        return t


@dataclass(frozen=True)
class Trigger:
    """Fires when an AHO (``device_id`` None) or device attribute becomes ``value``."""

    device_id: str | None
    name: str
    value: str

    def matches(self, event: StateChanged) -> bool:
        return event.changed and event.device_id == self.device_id and event.attribute == self.name \
            and str(event.value) == self.value


@dataclass(frozen=True)
class Routine:
    id: str
    trigger: Trigger
    action: AhoChange | DeviceAttributeChange


@dataclass(frozen=True)
class PhysicalAction:
    device_id: str
    verb: str
    params: tuple[tuple[str, str], ...] = ()


@dataclass(order=True)
class _Pending:
    time: int
    seq: int
    device_id: str = field(compare=False)
    attribute: str = field(compare=False)
    value: AttributeValue = field(compare=False)


class Platform:
    """A single simulated home with its monitor.

    All state changes, including routine actions and device reports, are
    submitted through ``submit`` and therefore through the reference monitor.
    """

    def __init__(self, catalog: DeviceCatalog, templates: Iterable[PolicyTemplate] = (), *,
                 freshness_ms: int = DEFAULT_THRESHOLD_MS, reset_delay_ms: int = DEFAULT_RESET_DELAY_MS,
                 adjacency: Mapping[str, Iterable[str]] | None = None, locations: Iterable[str] = (),
                 endorsement_enabled: bool = True, keep_trace: bool = False, keep_audit: bool = True,
                 keep_event_log: bool = True, use_current_state: bool = False):
        self.clock = Clock()
        self.bus = EventBus(keep_log=keep_event_log)
        self.home = Home(catalog, self.bus, adjacency=adjacency, locations=locations)
        self.cfg = FreshnessConfig(freshness_ms)
        self.reset_delay_ms = reset_delay_ms
        self.state = StateMachine(self.home, keep_trace=keep_trace)
        self.channel = NotificationChannel()
        self.engine = PolicyEngine(self.home, templates, self.cfg, warn=self._warn, enabled=endorsement_enabled)
        self.monitor = ReferenceMonitor(self.home, self.state, self.engine, self.channel,
                                        endorsement_enabled=endorsement_enabled, keep_audit=keep_audit,
                                        use_current_state=use_current_state)
        self.routines: list[Routine] = []
        self.local_tokens: set[str] = set()
        self._pending: list[_Pending] = []
        self._pending_seq = 0
        self._events: list[StateChanged] = []
        self.bus.subscribe(StateChanged, self._events.append)
        self.errors: list[str] = []

    # -- construction ------------------------------------------------------

    def _warn(self, aho: str, value: str, message: str) -> None:
        self.channel.append(time=self.clock.now, kind="warning", aho=aho, value=value, message=message)

    def add_routine(self, routine: Routine) -> None:
        t = routine.trigger
        if t.device_id is None:
            if t.value not in self.home.aho(t.name).values:
                raise ConfigError(f"routine {routine.id}: trigger value {t.value!r} not in domain")
        else:
            dev = self.home.device(t.device_id)
            spec = self.home.catalog.get(dev.device_type, t.name)
            if AttributeValue.parse(t.value) not in spec.value_domain:
                raise ConfigError(f"routine {routine.id}: trigger value {t.value!r} not in domain")
        a = routine.action
        if isinstance(a, AhoChange):
            if a.new_value not in self.home.aho(a.aho).values:
                raise ConfigError(f"routine {routine.id}: action value {a.new_value!r} not in domain")
        else:
            dev = self.home.device(a.device_id)
            if a.value not in self.home.catalog.get(dev.device_type, a.attribute).value_domain:
                raise ConfigError(f"routine {routine.id}: action value {a.value} not in domain")
        if any(r.id == routine.id for r in self.routines):
            raise ConfigError(f"duplicate routine id {routine.id}")
        self.routines.append(routine)
        self.routines.sort(key=lambda r: r.id)

    @property
    def now(self) -> int:
        return self.clock.now

    # -- time --------------------------------------------------------------

    def advance_to(self, t: int) -> None:
        """Move the clock to ``t``, delivering every scheduled reset due on the way."""
        while self._pending and self._pending[0].time <= t:
            p = heapq.heappop(self._pending)
            self.clock.advance_to(p.time)
            dev = self.home.devices.get(p.device_id)
            if dev is None or not dev.online:
                continue
            self.submit(StateChangeRequest(Principal.device(p.device_id),
                                           DeviceReport(p.device_id, p.attribute, p.value), p.time))
        self.clock.advance_to(t)

    def advance_by(self, ms: int) -> None:
        self.advance_to(self.clock.now + ms)

    def _schedule(self, t: int, device_id: str, attribute: str, value: AttributeValue) -> None:
        key = (device_id, attribute)
        # a newer activation supersedes the pending reset
        self._pending = [p for p in self._pending if (p.device_id, p.attribute) != key]
        heapq.heapify(self._pending)
        self._pending_seq += 1
        heapq.heappush(self._pending, _Pending(t, self._pending_seq, device_id, attribute, value))

    # -- requests ----------------------------------------------------------

    def submit(self, req: StateChangeRequest) -> MediationOutcome:
        """Mediate ``req`` and then run any routines it triggers to quiescence."""
        self._events.clear()
        outcome = self.monitor.mediate(req)
        events = [(e, 0) for e in self._events]
        self._events.clear()
        self._cascade(events)
        return outcome

    def request(self, principal: Principal, target, at: int | None = None) -> MediationOutcome:
        return self.submit(StateChangeRequest(principal, target, self.clock.now if at is None else at))

    def set_aho(self, principal: Principal, aho: str, value: str) -> MediationOutcome:
        return self.request(principal, AhoChange(aho, value))

    def set_attr(self, principal: Principal, device_id: str, attribute: str, value: str) -> MediationOutcome:
        return self.request(principal, DeviceAttributeChange(device_id, attribute, AttributeValue.parse(value)))

    def apply_physical(self, action: PhysicalAction) -> list[MediationOutcome]:
        dev = self.home.device(action.device_id)
        if not dev.online:
            raise DeviceOffline(action.device_id)
        inter = self.home.catalog.interaction(dev.device_type, action.verb)
        if inter is None:
            raise UnknownVerb(f"{dev.device_type} has no verb {action.verb!r}")
        now_values, later_values = inter.render(dict(action.params))
        outcomes = []
        for attr, value in now_values:
            req = StateChangeRequest(Principal.device(dev.id), DeviceReport(dev.id, attr, value), self.clock.now)
            outcomes.append(self.submit(req))
        delay = inter.reset_after_ms if inter.reset_after_ms is not None else self.reset_delay_ms
        for attr, value in later_values:
            self._schedule(self.clock.now + delay, dev.id, attr, value)
        return outcomes

    # -- automations -------------------------------------------------------

    def run_automations(self, event: StateChanged) -> list[tuple[str, MediationOutcome]]:
        return self._cascade([(event, 0)])

    def _cascade(self, queue: list[tuple[StateChanged, int]]) -> list[tuple[str, MediationOutcome]]:
        executed = []
        i = 0
        while i < len(queue):
            event, depth = queue[i]
            i += 1
            for routine in self.routines:
                if not routine.trigger.matches(event):
                    continue
                if depth + 1 > MAX_CASCADE_DEPTH:
                    raise CascadeDepthExceeded(f"routine {routine.id} at depth {depth + 1}")
                self._events.clear()
                out = self.monitor.mediate(StateChangeRequest(Principal.platform_app(), routine.action, event.timestamp))
                executed.append((routine.id, out))
                if not out.applied:
                    self.errors.append(f"routine {routine.id}: {out.status.value}")
                queue.extend((e, depth + 1) for e in self._events)
                self._events.clear()
        return executed

    # -- observation -------------------------------------------------------

    def states(self) -> dict:
        devices = {}
        for rec in self.state.records():
            devices.setdefault(rec.device_id, {})[rec.attribute] = str(rec.value)
        return {
            "time": self.clock.now,
            "ahos": {name: a.value for name, a in sorted(self.home.ahos.items())},
            "devices": devices,
        }

    def attr_value(self, device_id: str, attribute: str) -> str | None:
        rec = self.state.latest(device_id, attribute)
        return None if rec is None else str(rec.value)

    # -- config ------------------------------------------------------------

    @classmethod
    def from_config(cls, config: str | Path | Mapping, policy_files: Iterable[str | Path] = (),
                    base: str | Path | None = None, **kwargs) -> Platform:
        """Boot a platform from a home configuration (path or parsed mapping).

        Relative paths inside the config resolve against ``base``, which
        defaults to the config file's directory.
        """
        data, base = read_config(config, base)
        catalog = load_catalog(data["catalog"], base)
        templates = list(load_config_templates(data, base, catalog))
        for p in policy_files:
            templates.extend(load_templates(p))
        return cls.from_parts(data, catalog, templates, **kwargs)

    @classmethod
    def from_parts(cls, data: Mapping, catalog: DeviceCatalog, templates: Iterable[PolicyTemplate],
                   **kwargs) -> Platform:
        """Boot from an already-parsed config, catalog and template list."""
        platform = cls(
            catalog, templates,
            freshness_ms=data.get("freshness_ms", DEFAULT_THRESHOLD_MS),
            reset_delay_ms=data.get("reset_delay_ms", DEFAULT_RESET_DELAY_MS),
            adjacency=data.get("adjacency"),
            locations=data.get("locations", ()),
            **kwargs,
        )
        platform.configure(data)
        return platform

    def configure(self, data: Mapping) -> None:
        with self.engine.deferred():
            self._configure(data)

    def _configure(self, data: Mapping) -> None:
        home = self.home
        for a in data.get("ahos", []):
            home.define_aho(Aho(a["name"], tuple(a["values"]), a.get("value", a["values"][0]),
                                bool(a.get("endorsed", False)), set(a.get("grants", ()))))
        for t in data.get("tokens", []):
            home.add_token(ApiToken(t["token"], t.get("label", ""), frozenset(t.get("devices", ()))))
            for aho in t.get("ahos", ()):
                home.aho(aho).grants.add(t["token"])
        for aho in home.ahos.values():
            unknown = aho.grants - set(home.tokens)
            if unknown:
                raise ConfigError(f"AHO {aho.name} grants unknown tokens {sorted(unknown)}")
        self.local_tokens = set(data.get("local_tokens", ()))
        for d in data.get("devices", []):
            home.register_device(DeviceInstance(d["id"], d["type"], d["location"], d.get("online", True)))
        for d in data.get("devices", []):
            for attr, value in sorted(d.get("initial", {}).items()):
                self.submit(StateChangeRequest(Principal.device(d["id"]),
                                               DeviceReport(d["id"], attr, AttributeValue.parse(value)),
                                               self.clock.now))
        for r in data.get("routines", []):
            self.add_routine(parse_routine(r))


def read_config(config: str | Path | Mapping, base: str | Path | None = None) -> tuple[dict, Path]:
    if isinstance(config, (str, Path)):
        path = Path(config)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return data, Path(base) if base is not None else path.parent
    return dict(config), Path(base) if base is not None else Path(".")


def parse_routine(r: Mapping) -> Routine:
    try:
        when, then = r["when"], r["then"]
        if "aho" in when:
            trig = Trigger(None, when["aho"], when["value"])
        else:
            trig = Trigger(when["device"], when["attribute"], when["value"])
        if "aho" in then:
            action: AhoChange | DeviceAttributeChange = AhoChange(then["aho"], then["value"])
        else:
            action = DeviceAttributeChange(then["device"], then["attribute"], AttributeValue.parse(then["value"]))
        return Routine(r["id"], trig, action)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad routine {dict(r)!r}: {exc}") from exc


def load_catalog(ref: str | Mapping, base: Path = Path(".")) -> DeviceCatalog:
    if isinstance(ref, Mapping):
        return DeviceCatalog.from_dict(ref)
    path = (base / ref) if not Path(ref).is_absolute() else Path(ref)
    return DeviceCatalog.from_dict(json.loads(path.read_text()))


def load_config_templates(data: Mapping, base: Path, catalog: DeviceCatalog) -> Iterable[PolicyTemplate]:
    from .spec.templates import generate_templates, load_inferences

    for ref in data.get("policy_files", []):
        yield from load_templates(base / ref)
    for ref in data.get("inference_files", []):
        yield from generate_templates(load_inferences(base / ref, catalog))
