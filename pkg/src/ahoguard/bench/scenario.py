"""Scenario scripts: parse, replay on a fresh platform, compare against expectations.

Grammar, one command per line, offsets in ms from scenario start::

    at +<ms> physical <dev> <verb> [k=v]...
    at +<ms> api token=<t> set-aho <aho> <value>
    at +<ms> api token=<t> set-attr <dev> <attr> <value>
    at +<ms> local set-aho <aho> <value>
    at +<ms> expect allow
    at +<ms> expect deny (permission|endorsement|tamper)

``#`` starts a comment. A ``# config: <path>`` comment names the home
configuration, relative to the script.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..errors import ConfigError, HomeError, ScriptParseError
from ..model import Principal
from ..monitor import MediationStatus
from ..platform import PhysicalAction, Platform

_EXPECT = {
    "allow": MediationStatus.APPLIED,
    "deny permission": MediationStatus.DENIED_PERMISSION,
    "deny endorsement": MediationStatus.DENIED_ENDORSEMENT,
    "deny tamper": MediationStatus.DENIED_TAMPER,
}
_AT_RE = re.compile(r"^at\s+\+(\d+)\s+(\S.*)$")
_CONFIG_RE = re.compile(r"^#\s*config:\s*(\S+)\s*$")


@dataclass(frozen=True)
class Step:
    line: int
    at: int
    kind: str  # physical | api | local | expect
    args: tuple[str, ...]
    token: str | None = None
    params: tuple[tuple[str, str], ...] = ()


@dataclass
class Script:
    id: str
    steps: list[Step]
    config: Path | None = None


def parse_script(text: str, script_id: str = "<script>", base: Path | None = None) -> Script:
    steps: list[Step] = []
    config = None
    last = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = _CONFIG_RE.match(line)
        if m:
            config = (base / m.group(1)) if base is not None else Path(m.group(1))
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _AT_RE.match(line)
        if not m:
            raise ScriptParseError("expected 'at +<ms> <command>'", path=script_id, line=lineno, column=1)
        at = int(m.group(1))
        if at < last:
            raise ScriptParseError(f"offset {at} goes back in time (previous {last})", path=script_id,
                                   line=lineno, column=4)
        last = at
        steps.append(_parse_command(m.group(2).split(), at, lineno, script_id, raw.index(m.group(2)) + 1))
    return Script(script_id, steps, config)


def _parse_command(words: list[str], at: int, lineno: int, path: str, col: int) -> Step:
    def fail(msg: str) -> ScriptParseError:
        return ScriptParseError(msg, path=path, line=lineno, column=col)

    head, rest = words[0], words[1:]
    if head == "physical":
        if len(rest) < 2:
            raise fail("physical needs <device> <verb>")
        params = []
        for kv in rest[2:]:
            k, sep, v = kv.partition("=")
            if not sep or not k:
                raise fail(f"bad parameter {kv!r}; expected k=v")
            params.append((k, v))
        return Step(lineno, at, "physical", tuple(rest[:2]), params=tuple(params))
    if head == "api":
        if not rest or not rest[0].startswith("token="):
            raise fail("api needs token=<t>")
        token = rest[0][len("token="):]
        cmd = rest[1:]
        if cmd[:1] == ["set-aho"] and len(cmd) == 3:
            return Step(lineno, at, "api", tuple(cmd), token=token)
        if cmd[:1] == ["set-attr"] and len(cmd) == 4:
            return Step(lineno, at, "api", tuple(cmd), token=token)
        raise fail("api expects 'set-aho <aho> <value>' or 'set-attr <dev> <attr> <value>'")
    if head == "local":
        if len(rest) == 3 and rest[0] == "set-aho":
            return Step(lineno, at, "local", tuple(rest))
        raise fail("local expects 'set-aho <aho> <value>'")
    if head == "expect":
        key = " ".join(rest)
        if key not in _EXPECT:
            raise fail(f"unknown expectation {key!r}")
        return Step(lineno, at, "expect", (key,))
    raise fail(f"unknown command {head!r}")


def load_script(path: str | Path) -> Script:
    path = Path(path)
    return parse_script(path.read_text(), path.name, base=path.parent)


@dataclass(frozen=True)
class RequestResult:
    line: int
    at: int
    request: str
    status: str

    @property
    def decision(self) -> str:
        return "ALLOW" if self.status == MediationStatus.APPLIED.value else "DENY"


@dataclass(frozen=True)
class ExpectationResult:
    line: int
    expected: str
    actual: str | None
    passed: bool


@dataclass
class ScenarioResult:
    script_id: str
    requests: list[RequestResult] = field(default_factory=list)
    expectations: list[ExpectationResult] = field(default_factory=list)
    audit: str = ""
    notifications: list[dict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(e.passed for e in self.expectations)

    @property
    def decisions(self) -> list[str]:
        return [r.decision for r in self.requests]

    @property
    def first_failure(self) -> ExpectationResult | None:
        return next((e for e in self.expectations if not e.passed), None)

    def to_dict(self) -> dict:
        return {
            "script": self.script_id,
            "passed": self.passed,
            "decisions": self.decisions,
            "requests": [dict(r.__dict__, decision=r.decision) for r in self.requests],
            "expectations": [e.__dict__ for e in self.expectations],
            "notifications": self.notifications,
            "errors": self.errors,
        }


def resolve_config(script: Script, script_path: Path | None, config: str | Path | None) -> Path:
    if config is not None:
        return Path(config)
    if script.config is not None:
        return script.config
    if script_path is not None:
        sibling = script_path.with_suffix(".json")
        if sibling.exists():
            return sibling
    raise ConfigError(f"{script.id}: no home configuration given")


def run_scenario(script: str | Path | Script, config: str | Path | None = None,
                 policy_files: Iterable[str | Path] = (), **platform_kwargs) -> ScenarioResult:
    """Boot a fresh platform and replay ``script`` on its logical clock."""
    path = None
    if not isinstance(script, Script):
        path = Path(script)
        script = load_script(path)
    platform = Platform.from_config(resolve_config(script, path, config), policy_files, **platform_kwargs)
    return replay(platform, script)


def replay(platform: Platform, script: Script) -> ScenarioResult:
    result = ScenarioResult(script.id)
    start = platform.now
    last_status: str | None = None
    for step in script.steps:
        platform.advance_to(start + step.at)
        if step.kind == "expect":
            want = _EXPECT[step.args[0]].value
            result.expectations.append(ExpectationResult(step.line, want, last_status, want == last_status))
            continue
        try:
            if step.kind == "physical":
                platform.apply_physical(PhysicalAction(step.args[0], step.args[1], step.params))
                continue
            principal = Principal.local_user() if step.kind == "local" else Principal.third_party(step.token)
            if step.args[0] == "set-aho":
                out = platform.set_aho(principal, step.args[1], step.args[2])
            else:
                out = platform.set_attr(principal, step.args[1], step.args[2], step.args[3])
            last_status = out.status.value
        except HomeError as exc:
            last_status = f"ERROR({type(exc).__name__})"
            result.errors.append(f"line {step.line}: {type(exc).__name__}: {exc}")
        label = f"{step.kind} {'token=' + step.token + ' ' if step.token else ''}{' '.join(step.args)}"
        result.requests.append(RequestResult(step.line, step.at, label, last_status))
    result.errors.extend(platform.errors)
    result.audit = platform.monitor.audit_jsonl()
    result.notifications = [n.to_dict() for n in platform.channel]
    return result
