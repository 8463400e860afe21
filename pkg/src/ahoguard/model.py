"""Home vocabulary: device catalog, inventory, abstract home objects, principals."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import (
    ConfigError,
    DuplicateId,
    InvalidValue,
    UnknownAho,
    UnknownAttribute,
    UnknownDeviceType,
    UnknownId,
)
from .events import DeviceAdded, DeviceOffline, DeviceOnline, DeviceRemoved, EndorsementChanged, EventBus

_VALUE_RE = re.compile(r"^\s*([^()\s]+)\s*(?:\(\s*([^()\s]+)\s*\))?\s*$")


@dataclass(frozen=True, order=True)
class AttributeValue:
    """A symbolic state such as ``UNLOCKED(owner)``.

    Equality covers the qualifier too, so ``UNLOCKED`` and ``UNLOCKED(owner)``
    are different values.
    """

    label: str
    qualifier: str | None = None

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("attribute value label must be non-empty")

    @classmethod
    def parse(cls, text: str | AttributeValue) -> AttributeValue:
        if isinstance(text, AttributeValue):
            return text
        m = _VALUE_RE.match(text)
        if not m:
            raise ValueError(f"malformed attribute value {text!r}")
        return cls(m.group(1), m.group(2))

    def __str__(self) -> str:
        return self.label if self.qualifier is None else f"{self.label}({self.qualifier})"


class TrustClass(str, enum.Enum):
    READ_ONLY = "READ_ONLY"
    DESIGNATED = "DESIGNATED"
    UNTRUSTED = "UNTRUSTED"

    @property
    def endorsement(self) -> bool:
        return self is not TrustClass.UNTRUSTED


@dataclass(frozen=True)
class DeviceAttribute:
    device_type: str
    attribute: str
    trust_class: TrustClass
    value_domain: tuple[AttributeValue, ...]
    neutral: AttributeValue | None = None

    def __post_init__(self) -> None:
        if not self.value_domain:
            raise ConfigError(f"{self.pair}: value domain must be non-empty")
        if self.neutral is not None and self.neutral not in self.value_domain:
            raise ConfigError(f"{self.pair}: neutral value {self.neutral} not in domain")

    @property
    def pair(self) -> str:
        return f"{self.device_type}.{self.attribute}"

    @property
    def is_endorsement(self) -> bool:
        return self.trust_class.endorsement

    def to_dict(self) -> dict:
        out = {
            "device_type": self.device_type,
            "attribute": self.attribute,
            "trust_class": self.trust_class.value,
            "values": [str(v) for v in self.value_domain],
        }
        if self.neutral is not None:
            out["neutral"] = str(self.neutral)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> DeviceAttribute:
        try:
            neutral = d.get("neutral")
            return cls(
                device_type=d["device_type"],
                attribute=d["attribute"],
                trust_class=TrustClass(d.get("trust_class", "UNTRUSTED")),
                value_domain=tuple(AttributeValue.parse(v) for v in d["values"]),
                neutral=AttributeValue.parse(neutral) if neutral else None,
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad device attribute entry {dict(d)!r}: {exc}") from exc


@dataclass(frozen=True)
class Interaction:
    """What a physical verb does to a device: values set now, values restored later.

    Value templates may reference parameters, e.g. ``UNLOCKED({method})``.
    """

    verb: str
    sets: tuple[tuple[str, str], ...]
    resets: tuple[tuple[str, str], ...] = ()
    reset_after_ms: int | None = None
    defaults: tuple[tuple[str, str], ...] = ()

    def render(self, params: Mapping[str, str]) -> tuple[list[tuple[str, AttributeValue]], list[tuple[str, AttributeValue]]]:
        merged = dict(self.defaults)
        merged.update(params)
        try:
            now = [(a, AttributeValue.parse(t.format(**merged))) for a, t in self.sets]
            later = [(a, AttributeValue.parse(t.format(**merged))) for a, t in self.resets]
        except KeyError as exc:
            raise InvalidValue(f"verb {self.verb!r} needs parameter {exc.args[0]!r}") from exc
        return now, later

    @classmethod
    def from_dict(cls, verb: str, d: Mapping) -> Interaction:
        return cls(
            verb=verb,
            sets=tuple(sorted(d.get("set", {}).items())),
            resets=tuple(sorted(d.get("reset", {}).items())),
            reset_after_ms=d.get("reset_after_ms"),
            defaults=tuple(sorted(d.get("params", {}).items())),
        )

    def to_dict(self) -> dict:
        out: dict = {"set": dict(self.sets)}
        if self.resets:
            out["reset"] = dict(self.resets)
        if self.reset_after_ms is not None:
            out["reset_after_ms"] = self.reset_after_ms
        if self.defaults:
            out["params"] = dict(self.defaults)
        return out


class DeviceCatalog:
    """Closed-world table of device types, their attributes and physical verbs."""

    def __init__(self, attributes: Iterable[DeviceAttribute] = (), interactions: Mapping[str, Mapping[str, Interaction]] | None = None):
        self._attrs: dict[tuple[str, str], DeviceAttribute] = {}
        for a in attributes:
            key = (a.device_type, a.attribute)
            if key in self._attrs:
                raise ConfigError(f"duplicate device attribute {a.pair}")
            self._attrs[key] = a
        self._by_type: dict[str, dict[str, DeviceAttribute]] = {}
        for (t, name), a in sorted(self._attrs.items()):
            self._by_type.setdefault(t, {})[name] = a
        self.interactions: dict[str, dict[str, Interaction]] = {t: dict(v) for t, v in (interactions or {}).items()}
        for t in self.interactions:
            if t not in self._by_type:
                raise ConfigError(f"interactions declared for unknown device type {t!r}")

    def __len__(self) -> int:
        return len(self._attrs)

    def __iter__(self):
        return iter(sorted(self._attrs.values(), key=lambda a: (a.device_type, a.attribute)))

    def __contains__(self, key: tuple[str, str]) -> bool:
        return key in self._attrs

    @property
    def types(self) -> list[str]:
        return sorted(self._by_type)

    def has_type(self, device_type: str) -> bool:
        return device_type in self._by_type

    def attributes_of(self, device_type: str) -> dict[str, DeviceAttribute]:
        try:
            return self._by_type[device_type]
        except KeyError:
            raise UnknownDeviceType(device_type) from None

    def get(self, device_type: str, attribute: str) -> DeviceAttribute:
        try:
            return self._attrs[(device_type, attribute)]
        except KeyError:
            if device_type not in self._by_type:
                raise UnknownDeviceType(device_type) from None
            raise UnknownAttribute(f"{device_type}.{attribute}") from None

    def endorsement_attributes(self) -> list[DeviceAttribute]:
        return [a for a in self if a.is_endorsement]

    def interaction(self, device_type: str, verb: str) -> Interaction | None:
        return self.interactions.get(device_type, {}).get(verb)

    @classmethod
    def from_dict(cls, d: Mapping) -> DeviceCatalog:
        attrs = [DeviceAttribute.from_dict(e) for e in d.get("attributes", [])]
        inter = {
            t: {verb: Interaction.from_dict(verb, spec) for verb, spec in verbs.items()}
            for t, verbs in d.get("interactions", {}).items()
        }
        return cls(attrs, inter)

    def to_dict(self) -> dict:
        out: dict = {"attributes": [a.to_dict() for a in self]}
        if self.interactions:
            out["interactions"] = {
                t: {v: i.to_dict() for v, i in sorted(verbs.items())} for t, verbs in sorted(self.interactions.items())
            }
        return out


@dataclass
class DeviceInstance:
    id: str
    device_type: str
    location: str
    online: bool = True


@dataclass
class Aho:
    name: str
    values: tuple[str, ...]
    value: str
    endorsed: bool = False
    grants: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if not self.values:
            raise ConfigError(f"AHO {self.name!r} needs a non-empty value domain")
        if self.value not in self.values:
            raise ConfigError(f"AHO {self.name!r}: initial value {self.value!r} not in {self.values}")


@dataclass(frozen=True)
class ApiToken:
    token: str
    label: str = ""
    device_grants: frozenset[str] = frozenset()

    def may_write_device(self, device_id: str, attribute: str) -> bool:
        g = self.device_grants
        return f"{device_id}.{attribute}" in g or f"{device_id}.*" in g or "*" in g


class PrincipalKind(str, enum.Enum):
    PLATFORM_APP = "PLATFORM_APP"
    LOCAL_USER = "LOCAL_USER"
    THIRD_PARTY = "THIRD_PARTY"
    DEVICE_REPORT = "DEVICE_REPORT"


@dataclass(frozen=True)
class Principal:
    kind: PrincipalKind
    token: str | None = None
    device_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind is PrincipalKind.THIRD_PARTY and not self.token:
            raise ValueError("THIRD_PARTY principal needs a token")
        if self.kind is PrincipalKind.DEVICE_REPORT and not self.device_id:
            raise ValueError("DEVICE_REPORT principal needs a device id")

    @classmethod
    def platform_app(cls) -> Principal:
        return cls(PrincipalKind.PLATFORM_APP)

    @classmethod
    def local_user(cls) -> Principal:
        return cls(PrincipalKind.LOCAL_USER)

    @classmethod
    def third_party(cls, token: str) -> Principal:
        return cls(PrincipalKind.THIRD_PARTY, token=token)

    @classmethod
    def device(cls, device_id: str) -> Principal:
        return cls(PrincipalKind.DEVICE_REPORT, device_id=device_id)

    def __str__(self) -> str:
        if self.kind is PrincipalKind.THIRD_PARTY:
            return f"third_party:{self.token}"
        if self.kind is PrincipalKind.DEVICE_REPORT:
            return f"device:{self.device_id}"
        return self.kind.value.lower()


class Home:
    """Inventory of devices, locations and AHOs for a single home.

    Every inventory mutation publishes exactly one event on ``bus``.
    """

    def __init__(self, catalog: DeviceCatalog, bus: EventBus | None = None,
                 adjacency: Mapping[str, Iterable[str]] | None = None,
                 locations: Iterable[str] = ()):
        self.catalog = catalog
        self.bus = bus if bus is not None else EventBus()
        self.devices: dict[str, DeviceInstance] = {}
        self.ahos: dict[str, Aho] = {}
        self.tokens: dict[str, ApiToken] = {}
        self._locations: set[str] = set(locations)
        self.adjacency: dict[str, tuple[str, ...]] = {}
        for loc, near in (adjacency or {}).items():
            self.adjacency[loc] = tuple(sorted(set(near)))
            self._locations.add(loc)
            self._locations.update(near)

    @property
    def locations(self) -> list[str]:
        return sorted(self._locations | {d.location for d in self.devices.values()})

    def register_device(self, instance: DeviceInstance) -> DeviceAdded:
        if instance.id in self.devices:
            raise DuplicateId(instance.id)
        if not self.catalog.has_type(instance.device_type):
            raise UnknownDeviceType(instance.device_type)
        self.devices[instance.id] = instance
        self._locations.add(instance.location)
        event = DeviceAdded(instance.id)
        self.bus.publish(event)
        return event

    def remove_device(self, device_id: str) -> DeviceRemoved:
        if device_id not in self.devices:
            raise UnknownId(device_id)
        del self.devices[device_id]
        event = DeviceRemoved(device_id)
        self.bus.publish(event)
        return event

    def set_online(self, device_id: str, online: bool) -> DeviceOnline | DeviceOffline:
        dev = self.device(device_id)
        dev.online = online
        event = DeviceOnline(device_id) if online else DeviceOffline(device_id)
        self.bus.publish(event)
        return event

    def device(self, device_id: str) -> DeviceInstance:
        try:
            return self.devices[device_id]
        except KeyError:
            raise UnknownId(device_id) from None

    def devices_at(self, location: str) -> list[DeviceInstance]:
        return sorted((d for d in self.devices.values() if d.location == location), key=lambda d: d.id)

    def define_aho(self, aho: Aho) -> None:
        if aho.name in self.ahos:
            raise DuplicateId(aho.name)
        self.ahos[aho.name] = aho

    def aho(self, name: str) -> Aho:
        try:
            return self.ahos[name]
        except KeyError:
            raise UnknownAho(name) from None

    def set_endorsed(self, name: str, flag: bool) -> None:
        aho = self.aho(name)
        aho.endorsed = flag
        self.bus.publish(EndorsementChanged(name, flag))

    def add_token(self, token: ApiToken) -> None:
        if token.token in self.tokens:
            raise DuplicateId(token.token)
        self.tokens[token.token] = token
