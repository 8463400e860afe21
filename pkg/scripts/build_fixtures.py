"""Regenerate the bundled device-attribute source fixtures.

The testbed catalog (data/catalog.json) is the hand-authored core. This
script adds filler device types so that the merged map has the dataset shape
the toolkit is tested against, and spreads everything over the three source
formats plus a designated-override file.

    python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "ahoguard" / "data"
OUT = DATA / "sources"

TARGET_TYPES = 100
TARGET_PAIRS = 510
TARGET_ENDORSEMENT = 41

# (type, capabilities) rendered as device-handler preambles
HANDLER_TYPES = [
    ("Water Sensor", ["Water Sensor", "Sensor"]),
    ("Humidity Sensor", ["Relative Humidity Measurement", "Sensor"]),
    ("Contact Sensor", ["Contact Sensor", "Sensor"]),
    ("Tamper Sensor", ["Tamper Alert", "Sensor"]),
    ("Glass Break Sensor", ["Sound Sensor", "Sensor"]),
    ("Alarm Siren", ["Alarm", "Actuator"]),
    ("Deadbolt", ["Lock", "Actuator", "Refresh"]),
    ("Water Valve", ["Valve", "Actuator"]),
    ("Color Bulb", ["Switch", "Switch Level", "Color Control", "Color Temperature", "Actuator"]),
    ("Smart Plug", ["Switch", "Indicator", "Power Source", "Actuator"]),
    ("Ceiling Fan", ["Switch", "Fan Speed", "Actuator"]),
    ("Media Player", ["Music Player", "Audio Volume", "Actuator"]),
    ("Window Shade", ["Window Shade", "Actuator"]),
]

_ACT = ["ACTIVE", "INACTIVE"]
_DET = ["CLEAR", "DETECTED"]
_LVL = ["LOW", "NORMAL", "HIGH"]

# read-only sensor readings published through OCF resources
OCF_SENSORS = {
    "vibration-sensor": ("vibration", _ACT, "INACTIVE"),
    "co2-sensor": ("co2", _LVL, None),
    "air-quality-sensor": ("aqi", ["GOOD", "FAIR", "POOR"], None),
    "power-meter": ("power", _LVL, None),
    "energy-meter": ("energy", _LVL, None),
    "doorbell": ("button", ["PUSHED", "IDLE"], "IDLE"),
    "gas-detector": ("gas", _DET, "CLEAR"),
    "uv-sensor": ("uv", _LVL, None),
    "rain-sensor": ("rain", ["DRY", "RAINING"], "DRY"),
    "tilt-sensor": ("tilt", _ACT, "INACTIVE"),
    "leak-detector": ("leak", ["DRY", "WET"], "DRY"),
    "window-sensor": ("contact", _ACT, "INACTIVE"),
    "pressure-mat": ("pressure", _ACT, "INACTIVE"),
}

# writable in OCF, trusted only through the designated list
OCF_DESIGNATED = {
    "smart-safe": ("lock", ["LOCKED", "UNLOCKED"]),
    "gate-lock": ("lock", ["LOCKED", "UNLOCKED"]),
}

OCF_ACTUATORS = [
    "tv", "air-purifier", "humidifier", "dehumidifier", "robot-vacuum", "coffee-maker", "kettle", "oven",
    "refrigerator", "dishwasher", "washer", "dryer", "microwave", "sprinkler", "pool-pump", "water-heater",
    "space-heater", "air-conditioner", "ceiling-light", "floor-lamp", "led-strip", "dimmer", "outlet",
    "power-strip", "garage-light", "porch-light", "doorbell-chime", "intercom", "projector", "soundbar",
    "streaming-stick", "game-console", "router", "mesh-node", "hub-bridge", "pet-feeder",
    "aquarium-controller", "irrigation-controller", "curtain-motor", "skylight", "fireplace",
    "towel-warmer", "bed-controller", "nursery-speaker", "wall-display", "smart-mirror", "ev-charger",
    "solar-inverter", "battery-storage", "range-hood", "bath-fan", "humidistat", "weather-display", "garden-light",
]

GENERIC = [
    ("label", ["DEFAULT", "CUSTOM"]),
    ("reporting-interval", ["SHORT", "LONG"]),
    ("led-mode", ["ON", "OFF"]),
    ("power-on-state", ["ON", "OFF", "PREVIOUS"]),
    ("auto-off", ["ENABLED", "DISABLED"]),
    ("child-lock", ["ENABLED", "DISABLED"]),
    ("schedule", ["ENABLED", "DISABLED"]),
    ("notification-mode", ["ALL", "NONE"]),
]

DESIGNATED_EXTRA = ["alarm-siren.alarm", "deadbolt.lock", "water-valve.valve", "smart-safe.lock", "gate-lock.lock"]


def slug(name: str) -> str:
    return "-".join(name.lower().split())


def main() -> None:
    catalog = json.loads((DATA / "catalog.json").read_text())
    from ahoguard.spec.ingest import CAPABILITIES, TAG_CAPABILITIES

    handler_types = {slug(n): [c for c in caps if c not in TAG_CAPABILITIES] for n, caps in HANDLER_TYPES}
    filler = sorted(set(handler_types) | set(OCF_SENSORS) | set(OCF_DESIGNATED) | set(OCF_ACTUATORS))
    core_types = sorted({a["device_type"] for a in catalog["attributes"]})
    assert not set(filler) & set(core_types)
    assert len(filler) + len(core_types) == TARGET_TYPES, len(filler) + len(core_types)

    specific = {t: [CAPABILITIES[c].attribute for c in caps] for t, caps in handler_types.items()}
    specific.update({t: [v[0]] for t, v in OCF_SENSORS.items()})
    specific.update({t: [v[0]] for t, v in OCF_DESIGNATED.items()})
    specific.update({t: ["power"] for t in OCF_ACTUATORS})
    need = TARGET_PAIRS - len(catalog["attributes"]) - sum(len(v) for v in specific.values())
    base, extra = divmod(need, len(filler))
    generics: dict[str, list] = {}
    for i, t in enumerate(filler):
        quota = base + (1 if i < extra else 0)
        pool = [g for g in GENERIC if g[0] not in specific[t]]
        assert quota <= len(pool), (t, quota)
        generics[t] = pool[:quota]

    OUT.mkdir(parents=True, exist_ok=True)

    # ATTR_LIST: the testbed catalog
    records = [{"type": a["device_type"], "attribute": a["attribute"],
                "writable": a["trust_class"] != "READ_ONLY", "values": a["values"],
                **({"neutral": a["neutral"]} if a.get("neutral") else {})}
               for a in catalog["attributes"]]
    (OUT / "testbed-attributes.json").write_text(json.dumps(records, indent=1) + "\n")

    # HANDLER_PREAMBLE: one definition block per handler type
    blocks = []
    for name, caps in HANDLER_TYPES:
        lines = [f'metadata {{', f'    definition (name: "{name}", namespace: "fixtures", author: "fixtures") {{']
        lines += [f'        capability "{c}"' for c in caps]
        lines += ['        fingerprint deviceId: "0x1000"', '    }', '', '    preferences {',
                  '        input "param1", "number", title: "Param"', '    }', '}', '']
        blocks.append("\n".join(lines))
    (OUT / "handlers.groovy").write_text("\n".join(blocks))

    # ATTR_LIST: vendor settings for handler types
    extras = [{"type": t, "attribute": g, "writable": True, "values": vals}
              for t in sorted(handler_types) for g, vals in generics[t]]
    (OUT / "vendor-settings.json").write_text(json.dumps(extras, indent=1) + "\n")

    # OCF_JSON: everything else, plus a conflicting read-only view of the valve
    ocf: dict = {}
    for t in sorted(set(filler) - set(handler_types)):
        props: dict = {}
        if t in OCF_SENSORS:
            attr, vals, neutral = OCF_SENSORS[t]
            props[attr] = {"readOnly": True, "enum": vals, **({"neutral": neutral} if neutral else {})}
        elif t in OCF_DESIGNATED:
            attr, vals = OCF_DESIGNATED[t]
            props[attr] = {"readOnly": False, "enum": vals}
        else:
            props["power"] = {"readOnly": False, "enum": ["ON", "OFF"]}
        settings = {g: {"readOnly": False, "enum": vals} for g, vals in generics[t]}
        ocf[t] = {"resources": {"oic.r.primary": {"properties": props},
                                "oic.r.settings": {"properties": settings}}}
    ocf["water-valve"] = {"resources": {"oic.r.valve": {"properties": {
        "valve": {"readOnly": True, "enum": ["OPEN", "CLOSED"]}}}}}
    (OUT / "devices.ocf.json").write_text(json.dumps({"device_types": ocf}, indent=1) + "\n")

    designated = sorted(f"{a['device_type']}.{a['attribute']}" for a in catalog["attributes"]
                        if a["trust_class"] == "DESIGNATED") + DESIGNATED_EXTRA
    (OUT / "designated.json").write_text(json.dumps({"designated": sorted(designated)}, indent=1) + "\n")

    manifest = {
        "files": [
            {"path": "testbed-attributes.json", "format": "ATTR_LIST"},
            {"path": "handlers.groovy", "format": "HANDLER_PREAMBLE"},
            {"path": "vendor-settings.json", "format": "ATTR_LIST"},
            {"path": "devices.ocf.json", "format": "OCF_JSON"},
        ],
        "designated": "designated.json",
    }
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")

    from ahoguard.data import dataset_catalog

    dataset_catalog.cache_clear()
    cat = dataset_catalog()
    shape = (len(cat.types), len(cat), len(cat.endorsement_attributes()))
    print("types=%d pairs=%d endorsement=%d" % shape)
    assert shape == (TARGET_TYPES, TARGET_PAIRS, TARGET_ENDORSEMENT), shape


if __name__ == "__main__":
    main()
