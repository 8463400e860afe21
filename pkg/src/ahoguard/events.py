"""Synchronous event bus used by the home registry, state machine and engine."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeviceAdded:
    device_id: str


@dataclass(frozen=True)
class DeviceRemoved:
    device_id: str


@dataclass(frozen=True)
class DeviceOffline:
    device_id: str


@dataclass(frozen=True)
class DeviceOnline:
    device_id: str


@dataclass(frozen=True)
class EndorsementChanged:
    aho: str
    endorsed: bool


@dataclass(frozen=True)
class StateChanged:
    """A device attribute or AHO took a new value.

    ``device_id`` is None for AHO changes, in which case ``attribute`` holds
    the AHO name. ``changed`` is False when the value repeated the previous one.
    """

    device_id: str | None
    attribute: str
    value: object
    previous: object
    timestamp: int
    changed: bool


INVENTORY_EVENTS = (DeviceAdded, DeviceRemoved, DeviceOffline, DeviceOnline)

Handler = Callable[[object], None]


class EventBus:
    """Publishes events to subscribers in subscription order and keeps a log."""

    def __init__(self, keep_log: bool = True) -> None:
        self._subs: dict[type, list[Handler]] = defaultdict(list)
        self._any: list[Handler] = []
        self.keep_log = keep_log
        self.log: list[object] = []

    def subscribe(self, event_type: type | None, handler: Handler) -> None:
        if event_type is None:
            self._any.append(handler)
        else:
            self._subs[event_type].append(handler)

    def publish(self, event: object) -> None:
        if self.keep_log:
            self.log.append(event)
        for handler in self._subs.get(type(event), ()):
            handler(event)
        for handler in self._any:
            handler(event)
