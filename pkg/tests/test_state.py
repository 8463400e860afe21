import pytest
from hypothesis import given, settings, strategies as st

from ahoguard.errors import InvalidValue, NonMonotonicTimestamp, UnknownDevice
from ahoguard.events import StateChanged
from ahoguard.model import DeviceInstance, Home
from ahoguard.state import FreshnessConfig, StateMachine

import oracles
from conftest import V


@pytest.fixture
def sm(tiny_catalog):
    home = Home(tiny_catalog)
    home.register_device(DeviceInstance("m1", "motion", "hall"))
    home.register_device(DeviceInstance("l1", "lock", "door"))
    return StateMachine(home, keep_trace=True)


def test_threshold_boundary_is_inclusive(sm):
    cfg = FreshnessConfig(60_000)
    sm.record_change("m1", "motion", "ACTIVE", 1000)
    assert sm.fresh_change("m1", "motion", 61_000, cfg) is not None
    assert sm.fresh_change("m1", "motion", 61_001, cfg) is None


def test_neutral_values_are_not_evidence(sm):
    cfg = FreshnessConfig()
    sm.record_change("m1", "motion", "INACTIVE", 0)
    assert sm.fresh_change("m1", "motion", 0, cfg) is None
    sm.record_change("m1", "motion", "ACTIVE", 5)
    sm.record_change("m1", "motion", "INACTIVE", 10)
    rec = sm.fresh_change("m1", "motion", 10, cfg)
    assert rec.value == V("ACTIVE") and rec.timestamp == 5
    assert sm.latest("m1", "motion").value == V("INACTIVE")


def test_untrusted_records_are_not_evidence(sm):
    cfg = FreshnessConfig()
    sm.record_change("l1", "lock", "UNLOCKED(owner)", 0, trusted=False)
    assert sm.fresh_change("l1", "lock", 0, cfg) is None
    assert sm.latest("l1", "lock").trusted is False


def test_equal_timestamps_allowed_but_not_going_back(sm):
    sm.record_change("l1", "lock", "LOCKED", 10)
    sm.record_change("l1", "lock", "UNLOCKED", 10)
    with pytest.raises(NonMonotonicTimestamp):
        sm.record_change("l1", "lock", "LOCKED", 9)


def test_rejects_unknown_pairs_and_values(sm):
    with pytest.raises(UnknownDevice):
        sm.record_change("ghost", "motion", "ACTIVE", 0)
    with pytest.raises(InvalidValue):
        sm.record_change("l1", "lock", "UNLOCKED(ghost)", 0)


def test_publishes_changed_flag(sm):
    seen = []
    sm.home.bus.subscribe(StateChanged, seen.append)
    sm.record_change("m1", "motion", "ACTIVE", 0)
    sm.record_change("m1", "motion", "ACTIVE", 1)
    sm.record_change("m1", "motion", "INACTIVE", 2)
    assert [e.changed for e in seen] == [True, False, True]


def test_removed_device_is_forgotten(sm):
    sm.record_change("m1", "motion", "ACTIVE", 0)
    sm.home.remove_device("m1")
    assert not sm.snapshot(0).has_device("m1")
    assert sm.snapshot(0).current("m1", "motion") is None


def test_snapshot_is_frozen(sm):
    sm.record_change("m1", "motion", "ACTIVE", 0)
    snap = sm.snapshot(0)
    sm.record_change("m1", "motion", "INACTIVE", 1)
    assert snap.current("m1", "motion").value == V("ACTIVE")


def test_threshold_must_be_positive():
    with pytest.raises(ValueError):
        FreshnessConfig(0)


step = st.tuples(
    st.sampled_from(["m1", "l1"]),
    st.integers(0, 40_000),
    st.booleans(),
    st.integers(0, 3),
)


@settings(max_examples=300, deadline=None)
@given(st.lists(step, max_size=30), st.integers(1, 90_000), st.integers(0, 90_000))
def test_fresh_change_matches_history_scan(tiny_catalog, steps, threshold, lookahead):
    home = Home(tiny_catalog)
    home.register_device(DeviceInstance("m1", "motion", "hall"))
    home.register_device(DeviceInstance("l1", "lock", "door"))
    sm = StateMachine(home)
    cfg = FreshnessConfig(threshold)
    domains = {"m1": ("motion", ["ACTIVE", "INACTIVE"], "INACTIVE"),
               "l1": ("lock", ["LOCKED", "UNLOCKED", "UNLOCKED(owner)"], None)}
    trace, t = [], 0
    for dev, gap, trusted, pick in steps:
        t += gap
        a, values, _ = domains[dev]
        value = values[pick % len(values)]
        sm.record_change(dev, a, value, t, trusted=trusted)
        trace.append({"device": dev, "attribute": a, "value": value, "ts": t, "trusted": trusted})
    now = t + lookahead
    for dev, (a, _, neutral) in domains.items():
        got = sm.fresh_change(dev, a, now, cfg)
        want = oracles.fresh_change(trace, dev, a, now, threshold, neutral)
        if want is None:
            assert got is None
        else:
            assert (str(got.value), got.timestamp) == (want["value"], want["ts"])
