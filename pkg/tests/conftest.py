from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ahoguard.data import DATA_DIR, HOMES_DIR, INFERENCES_DIR, SCENARIOS_DIR, testbed_catalog  # noqa: E402
from ahoguard.model import AttributeValue, DeviceAttribute, DeviceCatalog, TrustClass  # noqa: E402

V = AttributeValue.parse


def attr(t: str, a: str, cls: str, values: str, neutral: str | None = None) -> DeviceAttribute:
    return DeviceAttribute(t, a, TrustClass(cls), tuple(V(v) for v in values.split()), V(neutral) if neutral else None)


@pytest.fixture(scope="session")
def catalog() -> DeviceCatalog:
    return testbed_catalog()


@pytest.fixture(scope="session")
def tiny_catalog() -> DeviceCatalog:
    return DeviceCatalog([
        attr("lock", "lock", "DESIGNATED", "LOCKED UNLOCKED UNLOCKED(owner)"),
        attr("motion", "motion", "READ_ONLY", "ACTIVE INACTIVE", "INACTIVE"),
        attr("bulb", "power", "UNTRUSTED", "ON OFF"),
    ])


@pytest.fixture(scope="session")
def paths():
    return {"data": DATA_DIR, "homes": HOMES_DIR, "inferences": INFERENCES_DIR, "scenarios": SCENARIOS_DIR}


def small_platform(devices, *, ahos=None, tokens=None, routines=(), inference_files=("inferences/home-home.json",),
                   adjacency=None, **kwargs):
    """Boot a platform from an in-memory config over the bundled testbed catalog."""
    from ahoguard.platform import Platform

    config = {
        "catalog": "catalog.json",
        "locations": ["front-door", "hallway", "living-room"],
        "adjacency": adjacency if adjacency is not None else {"front-door": ["hallway"]},
        "inference_files": list(inference_files),
        "devices": [dict(zip(("id", "type", "location", "initial"), d)) if len(d) == 4
                    else dict(zip(("id", "type", "location"), d)) for d in devices],
        "ahos": ahos if ahos is not None else [
            {"name": "home", "values": ["away", "home"], "value": "away", "endorsed": True},
            {"name": "scene", "values": ["day", "night"], "value": "day"},
        ],
        "tokens": tokens if tokens is not None else [
            {"token": "tracker", "ahos": ["home", "scene"]},
            {"token": "kasa", "ahos": [], "devices": ["switch-1.power", "light-1.*"]},
        ],
        "local_tokens": ["dashboard"],
        "routines": list(routines),
    }
    return Platform.from_config(config, base=DATA_DIR, **kwargs)


# -- acceptance reporting --------------------------------------------------------

ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or (rep.when == "setup" and rep.failed)):
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed:
        lines = [ln for ln in str(rep.longrepr).splitlines() if ln.startswith("E ")]
        detail = (lines[0][1:].strip() if lines else "error") + (f" [{detail}]" if detail else "")
    ACCEPTANCE.append((marker.args[0], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
