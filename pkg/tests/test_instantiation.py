import random

from hypothesis import given, settings, strategies as st

from ahoguard.model import DeviceInstance, Home

import instantiation_check as ic
import oracles

TEMPLATES = ic.all_templates()


def test_universe_size():
    assert len(TEMPLATES) == 63
    assert sum(1 for _ in ic.all_homes()) == 1820


slot = st.tuples(st.sampled_from([t for t, _, _ in ic.UNIVERSE]), st.sampled_from(ic.LOCATIONS), st.booleans())


@settings(max_examples=400, deadline=None)
@given(st.lists(slot, max_size=4), st.lists(st.integers(0, 62), min_size=1, max_size=16, unique=True),
       st.randoms(use_true_random=False))
def test_instantiate_matches_oracle(catalog, slots, picks, rnd):
    ids = [f"d{i}" for i in range(len(slots))]
    rnd.shuffle(ids)
    devices = [{"id": i, "type": t, "location": loc, "online": on} for i, (t, loc, on) in zip(ids, slots)]
    ok, got, want = ic.compare(catalog, devices, [TEMPLATES[i] for i in picks])
    assert ok, (got, want)


def test_adjacent_only_device_is_bound_when_no_local_one(catalog):
    devices = [{"id": "z", "type": "motion-sensor", "location": "b", "online": True},
               {"id": "a", "type": "door-lock", "location": "a", "online": True}]
    chosen = [t for t in TEMPLATES if t[0].id == "home=home:door-lock.lock+motion-sensor.motion"]
    ok, got, _ = ic.compare(catalog, devices, chosen)
    assert ok and got[1] == [("a", [("a", "door-lock", "lock", "UNLOCKED(owner)"),
                                    ("z", "motion-sensor", "motion", "ACTIVE")])]


def test_oracle_sanity_without_package():
    devices = [{"id": "x", "type": "beacon", "location": "b", "online": True}]
    tpls = [{"id": "t1", "checks": [("beacon", "beacon", "ACTIVE")]},
            {"id": "t0", "checks": [("beacon", "beacon", "ACTIVE")]},
            {"id": "t2", "checks": [("beacon", "beacon", "ACTIVE"), ("door-lock", "lock", "LOCKED")]}]
    tid, preds = oracles.instantiate(tpls, devices, ["a", "b"], {"a": ["b"]})
    assert tid == "t0" and [loc for loc, _ in preds] == ["a", "b"]
