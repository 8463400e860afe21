"""Platform state machine: latest and most-recent-meaningful change per device attribute."""

from __future__ import annotations

import json
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .errors import InvalidValue, NonMonotonicTimestamp, UnknownDevice
from .events import DeviceRemoved, StateChanged
from .model import AttributeValue, Home

DEFAULT_THRESHOLD_MS = 60_000

Pair = tuple[str, str]


@dataclass(frozen=True)
class StateRecord:
    device_id: str
    attribute: str
    value: AttributeValue
    timestamp: int
    trusted: bool = True

    def to_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "attribute": self.attribute,
            "value": str(self.value),
            "timestamp": self.timestamp,
            "trusted": self.trusted,
        }


@dataclass(frozen=True)
class FreshnessConfig:
    threshold: int = DEFAULT_THRESHOLD_MS

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ValueError("freshness threshold must be positive")

    def is_fresh(self, record: StateRecord, now: int) -> bool:
        # age == threshold still counts as fresh
        return now - record.timestamp <= self.threshold


class StateSnapshot:
    """Frozen view of the state machine at logical time ``now``."""

    __slots__ = ("now", "_latest", "_evidence", "_devices")

    def __init__(self, now: int, latest: Mapping[Pair, StateRecord], evidence: Mapping[Pair, StateRecord],
                 devices: frozenset[str]):
        self.now = now
        self._latest = MappingProxyType(dict(latest))
        self._evidence = MappingProxyType(dict(evidence))
        self._devices = devices

    def has_device(self, device_id: str) -> bool:
        return device_id in self._devices

    def fresh_change(self, device_id: str, attribute: str, cfg: FreshnessConfig) -> StateRecord | None:
        rec = self._evidence.get((device_id, attribute))
        if rec is None or not cfg.is_fresh(rec, self.now):
            return None
        return rec

    def current(self, device_id: str, attribute: str) -> StateRecord | None:
        """Latest record regardless of neutrality or age."""
        return self._latest.get((device_id, attribute))

    def pairs(self) -> list[Pair]:
        return sorted(set(self._latest) | set(self._evidence))


class StateMachine:
    """Tracks two slots per (device, attribute): the latest record and the latest
    trusted record whose value is not the attribute's neutral value.
    """

    def __init__(self, home: Home, keep_trace: bool = False):
        self.home = home
        self._latest: dict[Pair, StateRecord] = {}
        self._evidence: dict[Pair, StateRecord] = {}
        self.keep_trace = keep_trace
        self.trace: list[StateRecord] = []
        home.bus.subscribe(DeviceRemoved, self._forget)

    def _forget(self, event: DeviceRemoved) -> None:
        for store in (self._latest, self._evidence):
            for key in [k for k in store if k[0] == event.device_id]:
                del store[key]

    def _check_pair(self, device_id: str, attribute: str):
        dev = self.home.devices.get(device_id)
        if dev is None:
            raise UnknownDevice(device_id)
        return self.home.catalog.get(dev.device_type, attribute)

    def record_change(self, device_id: str, attribute: str, value: AttributeValue | str, timestamp: int,
                      trusted: bool = True) -> StateRecord:
        spec = self._check_pair(device_id, attribute)
        value = AttributeValue.parse(value)
        if value not in spec.value_domain:
            raise InvalidValue(f"{spec.pair}: {value} not in domain")
        key = (device_id, attribute)
        prev = self._latest.get(key)
        if prev is not None and timestamp < prev.timestamp:
            raise NonMonotonicTimestamp(f"{device_id}.{attribute}: {timestamp} < {prev.timestamp}")
        rec = StateRecord(device_id, attribute, value, timestamp, trusted)
        self._latest[key] = rec
        if trusted and value != spec.neutral:
            self._evidence[key] = rec
        if self.keep_trace:
            self.trace.append(rec)
        previous = prev.value if prev is not None else None
        self.home.bus.publish(StateChanged(device_id, attribute, value, previous, timestamp, previous != value))
        return rec

    def latest(self, device_id: str, attribute: str) -> StateRecord | None:
        self._check_pair(device_id, attribute)
        return self._latest.get((device_id, attribute))

    def fresh_change(self, device_id: str, attribute: str, now: int, cfg: FreshnessConfig) -> StateRecord | None:
        self._check_pair(device_id, attribute)
        rec = self._evidence.get((device_id, attribute))
        if rec is None or not cfg.is_fresh(rec, now):
            return None
        return rec

    def snapshot(self, now: int) -> StateSnapshot:
        return StateSnapshot(now, self._latest, self._evidence, frozenset(self.home.devices))

    def records(self) -> list[StateRecord]:
        return [self._latest[k] for k in sorted(self._latest)]

    def export_trace(self) -> str:
        return json.dumps([r.to_dict() for r in self.trace], indent=2)
