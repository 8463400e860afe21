"""Endorsement policies: location-independent templates, their deployment-bound
DNF instances, and evaluation against a state snapshot.
"""

from __future__ import annotations

import contextlib
import enum
import functools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .errors import PolicyError
from .events import EndorsementChanged, INVENTORY_EVENTS
from .model import AttributeValue, DeviceCatalog, DeviceInstance, Home
from .state import FreshnessConfig, StateRecord, StateSnapshot

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class AttributeCheck:
    device_type: str
    attribute: str
    required_value: AttributeValue

    @property
    def pair(self) -> str:
        return f"{self.device_type}.{self.attribute}"

    def __str__(self) -> str:
        return f"{self.pair}=={self.required_value}"

    def to_dict(self) -> dict:
        return {"type": self.device_type, "attribute": self.attribute, "value": str(self.required_value)}

    @classmethod
    def from_dict(cls, d: Mapping) -> AttributeCheck:
        return cls(d["type"], d["attribute"], AttributeValue.parse(d["value"]))


def canonical_template_id(aho: str, target_value: str, checks: Iterable[AttributeCheck]) -> str:
    return f"{aho}={target_value}:" + "+".join(sorted(c.pair for c in checks))


@dataclass(frozen=True)
class PolicyTemplate:
    id: str
    aho: str
    target_value: str
    checks: tuple[AttributeCheck, ...]

    def __post_init__(self) -> None:
        if not self.checks:
            raise PolicyError(f"template {self.id}: no checks")
        pairs = [c.pair for c in self.checks]
        if len(set(pairs)) != len(pairs):
            raise PolicyError(f"template {self.id}: repeated device attribute")
        object.__setattr__(self, "checks", tuple(sorted(self.checks)))

    @functools.cached_property
    def device_types(self) -> frozenset[str]:
        return frozenset(c.device_type for c in self.checks)

    def validate(self, catalog: DeviceCatalog, known: set[AttributeCheck] | None = None) -> None:
        """Reject checks on untrusted attributes or values outside the domain.

        ``known`` holds checks already validated against ``catalog`` and is extended in place.
        """
        if self.__dict__.get("_valid_for") is catalog:
            return
        for c in self.checks:
            if known is not None and c in known:
                continue
            spec = catalog.get(c.device_type, c.attribute)
            if not spec.is_endorsement:
                raise PolicyError(f"template {self.id}: {c.pair} is not an endorsement attribute")
            if c.required_value not in spec.value_domain:
                raise PolicyError(f"template {self.id}: {c.required_value} not in domain of {c.pair}")
            if known is not None:
                known.add(c)
        # catalogs are not mutated after construction, so one pass per catalog suffices
        self.__dict__["_valid_for"] = catalog

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "aho": self.aho,
            "value": self.target_value,
            "checks": [c.to_dict() for c in self.checks],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PolicyTemplate:
        try:
            return cls(d["id"], d["aho"], d["value"], tuple(AttributeCheck.from_dict(c) for c in d["checks"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise PolicyError(f"bad template record {d!r}: {exc}") from exc


def dump_templates(templates: Iterable[PolicyTemplate]) -> str:
    return json.dumps({"templates": [t.to_dict() for t in sorted(templates, key=lambda t: t.id)]}, indent=1)


def load_templates(path: str | Path) -> list[PolicyTemplate]:
    data = json.loads(Path(path).read_text())
    records = data["templates"] if isinstance(data, dict) else data
    return [PolicyTemplate.from_dict(r) for r in records]


@dataclass(frozen=True)
class LocationPredicate:
    location: str
    bound_checks: tuple[tuple[str, AttributeCheck], ...]


@dataclass(frozen=True)
class InstantiatedPolicy:
    aho: str
    target_value: str
    template_id: str
    predicates: tuple[LocationPredicate, ...]

    @property
    def size(self) -> int:
        return len(self.predicates[0].bound_checks)

    def describe(self) -> str:
        parts = []
        for p in self.predicates:
            inner = " & ".join(f"{dev}.{c.attribute}=={c.required_value}" for dev, c in p.bound_checks)
            parts.append(f"({inner})@{p.location}")
        return f"P[{self.aho}={self.target_value}] = " + " | ".join(parts)

    def to_dict(self) -> dict:
        return {
            "aho": self.aho,
            "value": self.target_value,
            "template_id": self.template_id,
            "predicates": [
                {
                    "location": p.location,
                    "checks": [dict(c.to_dict(), device_id=dev) for dev, c in p.bound_checks],
                }
                for p in self.predicates
            ],
        }


class Action(str, enum.Enum):
    ALLOW = "ALLOW"
    DENY = "DENY"


@dataclass(frozen=True)
class CheckOutcome:
    device_id: str
    check: AttributeCheck
    satisfied: bool
    record: StateRecord | None = None
    reason: str | None = None

    def to_dict(self) -> dict:
        out = {"device_id": self.device_id, "check": str(self.check), "satisfied": self.satisfied}
        if self.record is not None:
            out["observed"] = str(self.record.value)
            out["at"] = self.record.timestamp
        if self.reason:
            out["reason"] = self.reason
        return out


@dataclass(frozen=True)
class PredicateOutcome:
    location: str
    checks: tuple[CheckOutcome, ...]

    @property
    def satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)


@dataclass(frozen=True)
class Decision:
    action: Action
    evidence: tuple[PredicateOutcome, ...] = ()
    reason: str | None = None

    @property
    def allowed(self) -> bool:
        return self.action is Action.ALLOW

    def failed_checks(self) -> list[str]:
        return [f"{p.location}:{c.device_id}.{c.check.attribute}=={c.check.required_value}"
                for p in self.evidence for c in p.checks if not c.satisfied]

    def to_dict(self) -> dict:
        out: dict = {
            "action": self.action.value,
            "predicates": [
                {"location": p.location, "satisfied": p.satisfied, "checks": [c.to_dict() for c in p.checks]}
                for p in self.evidence
            ],
        }
        if self.reason:
            out["reason"] = self.reason
        return out


# -- instantiation -----------------------------------------------------------

def _available_types(home_devices: Iterable[DeviceInstance], locations: Sequence[str],
                     adjacency: Mapping[str, Sequence[str]]) -> dict[str, set[str]]:
    by_loc: dict[str, set[str]] = {loc: set() for loc in locations}
    for d in home_devices:
        if d.online:
            by_loc.setdefault(d.location, set()).add(d.device_type)
    avail = {}
    for loc in by_loc:
        types = set(by_loc[loc])
        for near in adjacency.get(loc, ()):
            types |= by_loc.get(near, set())
        avail[loc] = types
    return avail


def feasible_locations(template: PolicyTemplate, home: Home) -> set[str]:
    """Locations where every device type of ``template`` has an online instance,
    either at the location itself or at a location declared adjacent to it.
    """
    avail = _available_types(home.devices.values(), home.locations, home.adjacency)
    need = template.device_types
    return {loc for loc, types in avail.items() if need <= types}


def _bind(template: PolicyTemplate, location: str, home: Home) -> LocationPredicate:
    near = home.adjacency.get(location, ())
    bound = []
    for check in template.checks:
        candidates = [d for d in home.devices.values() if d.online and d.device_type == check.device_type
                      and (d.location == location or d.location in near)]
        # local instances first, then lexicographically smallest id
        best = min(candidates, key=lambda d: (d.location != location, d.id))
        bound.append((best.id, check))
    return LocationPredicate(location, tuple(bound))


def instantiate(templates: Iterable[PolicyTemplate], home: Home, aho: str | None = None,
                target_value: str | None = None) -> InstantiatedPolicy | None:
    """Pick the most restrictive feasible template and bind it to every feasible location.

    Most restrictive means the most checks; ties go to the smallest template id.
    """
    avail = _available_types(home.devices.values(), home.locations, home.adjacency)
    ranked = sorted(templates, key=lambda t: (-len(t.checks), t.id))
    if ranked:
        aho = ranked[0].aho if aho is None else aho
        target_value = ranked[0].target_value if target_value is None else target_value
    for t in ranked:
        if t.aho != aho or t.target_value != target_value:
            raise PolicyError(f"template {t.id} does not target {aho}={target_value}")
    for t in ranked:
        need = t.device_types
        locs = sorted(loc for loc, types in avail.items() if need <= types)
        if locs:
            preds = tuple(_bind(t, loc, home) for loc in locs)
            return InstantiatedPolicy(t.aho, t.target_value, t.id, preds)
    return None


# -- evaluation --------------------------------------------------------------

def evaluate(policy: InstantiatedPolicy, snap: StateSnapshot, cfg: FreshnessConfig,
             use_current_state: bool = False) -> Decision:
    """Evaluate the DNF ``policy`` against ``snap``.

    Each check is satisfied when the device's most recent fresh, trusted,
    non-neutral change equals the required value exactly (label and qualifier).
    With ``use_current_state`` the check reads the device's latest record
    instead, which is what a naive current-state query would see.
    """
    preds = []
    any_ok = False
    for p in policy.predicates:
        outcomes = []
        for dev, check in p.bound_checks:
            if not snap.has_device(dev):
                outcomes.append(CheckOutcome(dev, check, False, reason="device_missing"))
                continue
            if use_current_state:
                rec = snap.current(dev, check.attribute)
                if rec is not None and (not rec.trusted or not cfg.is_fresh(rec, snap.now)):
                    rec = None
            else:
                rec = snap.fresh_change(dev, check.attribute, cfg)
            if rec is None:
                outcomes.append(CheckOutcome(dev, check, False, reason="no_fresh_change"))
            elif rec.value != check.required_value:
                outcomes.append(CheckOutcome(dev, check, False, rec, reason="value_mismatch"))
            else:
                outcomes.append(CheckOutcome(dev, check, True, rec))
        po = PredicateOutcome(p.location, tuple(outcomes))
        any_ok = any_ok or po.satisfied
        preds.append(po)
    return Decision(Action.ALLOW if any_ok else Action.DENY, tuple(preds))


# -- engine ------------------------------------------------------------------

Key = tuple[str, str]


class PolicyEngine:
    """Holds the template store and the active instantiated policy per endorsed
    (AHO, value), re-selecting on every inventory or endorsement change.
    """

    def __init__(self, home: Home, templates: Iterable[PolicyTemplate] = (), cfg: FreshnessConfig | None = None,
                 warn: Callable[[str, str, str], None] | None = None, enabled: bool = True):
        self.home = home
        self.cfg = cfg or FreshnessConfig()
        self.enabled = enabled
        self._warn = warn
        self.templates: dict[Key, list[PolicyTemplate]] = {}
        self.active: dict[Key, InstantiatedPolicy] = {}
        self.unprotectable: set[Key] = set()
        self.evaluations = 0
        self.instantiations = 0
        self._deferred = 0
        self.add_templates(templates)
        if enabled:
            for ev in INVENTORY_EVENTS + (EndorsementChanged,):
                home.bus.subscribe(ev, self.reinstantiate_on_event)

    def add_templates(self, templates: Iterable[PolicyTemplate]) -> None:
        seen = {t.id for ts in self.templates.values() for t in ts}
        valid: set[AttributeCheck] = set()
        for t in templates:
            t.validate(self.home.catalog, valid)
            if t.id in seen:
                raise PolicyError(f"duplicate template id {t.id}")
            seen.add(t.id)
            self.templates.setdefault((t.aho, t.target_value), []).append(t)

    def guards(self, aho: str, value: str) -> bool:
        """True when changing ``aho`` to ``value`` is subject to endorsement."""
        return (aho, value) in self.templates

    def reinstantiate(self) -> dict[Key, InstantiatedPolicy]:
        active: dict[Key, InstantiatedPolicy] = {}
        unprotectable: set[Key] = set()
        for key in sorted(self.templates):
            aho = self.home.ahos.get(key[0])
            if aho is None or not aho.endorsed:
                continue
            self.instantiations += 1
            policy = instantiate(self.templates[key], self.home)
            if policy is None:
                unprotectable.add(key)
            else:
                active[key] = policy
        newly = unprotectable - self.unprotectable
        self.active, self.unprotectable = active, unprotectable
        for aho, value in sorted(newly):
            log.warning("no feasible endorsement policy for %s=%s; third-party writes will be denied", aho, value)
            if self._warn:
                self._warn(aho, value, "no feasible endorsement policy; third-party changes are denied")
        return active

    def reinstantiate_on_event(self, event: object) -> None:
        if not self._deferred:
            self.reinstantiate()

    @contextlib.contextmanager
    def deferred(self):
        """Coalesce inventory events (e.g. while booting) into one reinstantiation."""
        self._deferred += 1
        try:
            yield self
        finally:
            self._deferred -= 1
            if not self._deferred and self.enabled:
                self.reinstantiate()

    def policy_for(self, aho: str, value: str) -> InstantiatedPolicy | None:
        return self.active.get((aho, value))

    def evaluate(self, policy: InstantiatedPolicy, snap: StateSnapshot, use_current_state: bool = False) -> Decision:
        self.evaluations += 1
        return evaluate(policy, snap, self.cfg, use_current_state)
