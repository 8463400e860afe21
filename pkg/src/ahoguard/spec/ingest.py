"""Build a device-attribute map from heterogeneous platform sources.

Three input shapes are understood:

``OCF_JSON``
    ``{"device_types": {type: {"resources": {res: {"properties": {name: {"readOnly": bool, "enum": [...]}}}}}}}``
``ATTR_LIST``
    ``[{"type": ..., "attribute": ..., "writable": bool, "values": [...]}, ...]``
``HANDLER_PREAMBLE``
    device-handler source text; only ``capability "X"`` lines inside a
    ``definition (name: "...")`` block are read.

Writability observations from all sources are merged per (type, attribute).
Unanimously non-writable pairs become READ_ONLY, unanimously writable ones
UNTRUSTED, and the override file decides DESIGNATED pairs and any pair on
which sources disagree.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from ..errors import ConflictingTrustClass, ParseError
from ..model import AttributeValue, DeviceAttribute, DeviceCatalog, TrustClass


class SourceFormat(str, enum.Enum):
    OCF_JSON = "OCF_JSON"
    ATTR_LIST = "ATTR_LIST"
    HANDLER_PREAMBLE = "HANDLER_PREAMBLE"


@dataclass(frozen=True)
class Capability:
    attribute: str
    writable: bool
    values: tuple[str, ...]
    neutral: str | None = None


_ONOFF = ("ON", "OFF")
_ACTIVE = ("ACTIVE", "INACTIVE")
_LEVEL3 = ("LOW", "NORMAL", "HIGH")

# capability name -> attribute it exposes
CAPABILITIES: dict[str, Capability] = {
    "Lock": Capability("lock", True, ("LOCKED", "UNLOCKED(owner)", "UNLOCKED(manual)")),
    "Battery": Capability("battery", False, ("OK", "LOW")),
    "Switch": Capability("power", True, _ONOFF),
    "Switch Level": Capability("level", True, ("DIM", "BRIGHT")),
    "Motion Sensor": Capability("motion", False, _ACTIVE, "INACTIVE"),
    "Contact Sensor": Capability("contact", False, _ACTIVE, "INACTIVE"),
    "Presence Sensor": Capability("presence", False, _ACTIVE, "INACTIVE"),
    "Acceleration Sensor": Capability("acceleration", False, _ACTIVE, "INACTIVE"),
    "Temperature Measurement": Capability("temperature", False, _LEVEL3),
    "Illuminance Measurement": Capability("illuminance", False, ("DARK", "DIM", "BRIGHT")),
    "Relative Humidity Measurement": Capability("humidity", False, _LEVEL3),
    "Water Sensor": Capability("water", False, ("DRY", "WET"), "DRY"),
    "Smoke Detector": Capability("smoke", False, ("CLEAR", "DETECTED"), "CLEAR"),
    "Carbon Monoxide Detector": Capability("co", False, ("CLEAR", "DETECTED"), "CLEAR"),
    "Tamper Alert": Capability("tamper", False, ("CLEAR", "DETECTED"), "CLEAR"),
    "Sound Sensor": Capability("sound", False, ("QUIET", "DETECTED"), "QUIET"),
    "Door Control": Capability("door", True, ("OPEN", "CLOSED")),
    "Window Shade": Capability("openLevel", True, ("OPEN", "PARTIAL", "CLOSED")),
    "Alarm": Capability("alarm", True, ("OFF", "SIREN", "STROBE")),
    "Color Control": Capability("color", True, ("WARM", "COOL", "RED", "BLUE")),
    "Color Temperature": Capability("colorTemperature", True, ("WARM", "NEUTRAL", "COOL")),
    "Music Player": Capability("playback", True, ("PLAYING", "PAUSED", "STOPPED")),
    "Audio Volume": Capability("volume", True, ("LOW", "MEDIUM", "HIGH")),
    "Thermostat Mode": Capability("thermostatMode", True, ("HEAT", "COOL", "AUTO", "OFF")),
    "Thermostat Setpoint": Capability("setpoint", True, ("ECO", "COMFORT")),
    "Fan Speed": Capability("fanSpeed", True, ("LOW", "MEDIUM", "HIGH")),
    "Valve": Capability("valve", True, ("OPEN", "CLOSED")),
    "Indicator": Capability("indicator", True, ("ON", "OFF", "WHEN_ON")),
    "Power Source": Capability("powerSource", True, ("MAINS", "BATTERY")),
}

# marker capabilities that carry no attribute
TAG_CAPABILITIES = frozenset({"Actuator", "Sensor", "Refresh", "Polling", "Configuration", "Health Check"})


def slug(name: str) -> str:
    """``"Z-Wave Lock"`` -> ``"zwave-lock"``."""
    cleaned = re.sub(r"[^0-9A-Za-z ]+", "", name)
    return "-".join(cleaned.lower().split())


@dataclass
class _Observed:
    writable: set[bool] = field(default_factory=set)
    values: list[str] = field(default_factory=list)
    neutral: str | None = None
    sources: set[str] = field(default_factory=set)


class DeviceAttributeMap:
    """Merged observations of (device type, attribute) pairs across sources."""

    def __init__(self) -> None:
        self._obs: dict[tuple[str, str], _Observed] = {}

    def __len__(self) -> int:
        return len(self._obs)

    @property
    def pairs(self) -> list[tuple[str, str]]:
        return sorted(self._obs)

    @property
    def device_types(self) -> list[str]:
        return sorted({t for t, _ in self._obs})

    def observe(self, device_type: str, attribute: str, writable: bool | None, values: Iterable[str],
                neutral: str | None = None, source: str = "") -> None:
        o = self._obs.setdefault((device_type, attribute), _Observed())
        if writable is not None:
            o.writable.add(bool(writable))
        for v in values:
            v = str(AttributeValue.parse(v))
            if v not in o.values:
                o.values.append(v)
        if neutral and o.neutral is None:
            o.neutral = str(AttributeValue.parse(neutral))
        if source:
            o.sources.add(source)

    def merge(self, other: DeviceAttributeMap) -> DeviceAttributeMap:
        for (t, a), o in other._obs.items():
            for w in o.writable:
                self.observe(t, a, w, o.values, o.neutral)
            if not o.writable:
                self.observe(t, a, None, o.values, o.neutral)
            self._obs[(t, a)].sources |= o.sources
        return self

    def conflicts(self) -> list[str]:
        return [f"{t}.{a}" for (t, a), o in sorted(self._obs.items()) if len(o.writable) > 1]

    def resolve(self, overrides: Mapping[str, Iterable[str]] | None = None) -> DeviceCatalog:
        """Assign trust classes and return the unified map as a catalog.

        Raises ConflictingTrustClass if sources disagree on a pair the
        override list does not settle.
        """
        forced: dict[str, TrustClass] = {}
        for key, cls in (("read_only", TrustClass.READ_ONLY), ("designated", TrustClass.DESIGNATED),
                         ("untrusted", TrustClass.UNTRUSTED)):
            for pair in (overrides or {}).get(key, ()):
                forced[pair] = cls
        unresolved = [p for p in self.conflicts() if p not in forced]
        if unresolved:
            raise ConflictingTrustClass(unresolved)
        out = []
        for (t, a), o in sorted(self._obs.items()):
            pair = f"{t}.{a}"
            if pair in forced:
                tc = forced[pair]
            elif o.writable == {False}:
                tc = TrustClass.READ_ONLY
            else:
                # unknown writability is treated as writable
                tc = TrustClass.UNTRUSTED
            values = tuple(AttributeValue.parse(v) for v in (o.values or ["ANY"]))
            neutral = AttributeValue.parse(o.neutral) if o.neutral else None
            out.append(DeviceAttribute(t, a, tc, values, neutral))
        return DeviceCatalog(out)


def _load_json(path: Path, text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=str(path), line=exc.lineno, column=exc.colno) from exc


def _ingest_ocf(path: Path, text: str, m: DeviceAttributeMap) -> None:
    doc = _load_json(path, text)
    types = doc.get("device_types") if isinstance(doc, dict) else None
    if not isinstance(types, dict):
        raise ParseError("expected an object with a 'device_types' mapping", path=str(path), line=1)
    for dtype, body in types.items():
        for res_name, res in (body.get("resources") or {}).items():
            for prop, meta in (res.get("properties") or {}).items():
                m.observe(dtype, prop, not meta.get("readOnly", False), meta.get("enum", ()),
                          meta.get("neutral"), source=f"ocf:{res_name}")


def _ingest_attr_list(path: Path, text: str, m: DeviceAttributeMap) -> None:
    doc = _load_json(path, text)
    if isinstance(doc, dict):
        doc = doc.get("attributes", [])
    if not isinstance(doc, list):
        raise ParseError("expected a list of attribute records", path=str(path), line=1)
    for i, rec in enumerate(doc):
        try:
            m.observe(rec["type"], rec["attribute"], rec.get("writable"), rec.get("values", ()),
                      rec.get("neutral"), source="attr-list")
        except (KeyError, TypeError) as exc:
            raise ParseError(f"record {i}: missing {exc}", path=str(path), line=0) from exc


_DEF_RE = re.compile(r'definition\s*\(\s*name\s*:\s*"([^"]+)"')
_CAP_RE = re.compile(r'^\s*capability\s+"([^"]+)"')


def parse_handler_preamble(text: str, path: str = "<input>") -> list[tuple[str, list[str]]]:
    """Return ``[(device name, [capability, ...])]`` for each definition block."""
    blocks: list[tuple[str, list[str]]] = []
    current: list[str] | None = None
    depth = 0
    start_line = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        code = line.split("//", 1)[0]
        if current is None:
            m = _DEF_RE.search(code)
            if m:
                current = []
                blocks.append((m.group(1), current))
                start_line = lineno
                tail = code[m.end():]
                depth = tail.count("{") - tail.count("}")
                if "{" not in tail:
                    raise ParseError("definition without an opening brace", path=path, line=lineno,
                                     column=m.start() + 1)
                if depth <= 0:
                    current = None
            continue
        cm = _CAP_RE.match(code)
        if cm and depth == 1:
            current.append(cm.group(1))
        depth += code.count("{") - code.count("}")
        if depth <= 0:
            current = None
    if current is not None:
        raise ParseError("unterminated definition block", path=path, line=start_line)
    return blocks


def _ingest_handler(path: Path, text: str, m: DeviceAttributeMap) -> None:
    for name, caps in parse_handler_preamble(text, str(path)):
        dtype = slug(name)
        for cap in caps:
            if cap in TAG_CAPABILITIES:
                continue
            spec = CAPABILITIES.get(cap)
            if spec is None:
                m.observe(dtype, slug(cap), None, (), source="handler")
            else:
                m.observe(dtype, spec.attribute, spec.writable, spec.values, spec.neutral, source="handler")


_READERS = {
    SourceFormat.OCF_JSON: _ingest_ocf,
    SourceFormat.ATTR_LIST: _ingest_attr_list,
    SourceFormat.HANDLER_PREAMBLE: _ingest_handler,
}


def ingest(source: str | Path, fmt: SourceFormat | str, into: DeviceAttributeMap | None = None) -> DeviceAttributeMap:
    path = Path(source)
    m = into if into is not None else DeviceAttributeMap()
    text = path.read_text()
    if not text.strip():
        return m
    _READERS[SourceFormat(fmt)](path, text, m)
    return m


def guess_format(path: str | Path) -> SourceFormat:
    p = str(path)
    if p.endswith((".groovy", ".txt")):
        return SourceFormat.HANDLER_PREAMBLE
    if p.endswith(".ocf.json"):
        return SourceFormat.OCF_JSON
    return SourceFormat.ATTR_LIST


def load_overrides(path: str | Path | None) -> dict[str, list[str]]:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())
