"""Latency benchmarks for the six platform operations, monitored vs. baseline.

The baseline is the same platform with endorsement switched off: templates
are loaded but never instantiated or evaluated. Each run times ``inner``
back-to-back repetitions of one operation and records their mean; a report
aggregates ``runs`` such means per configuration.
"""

from __future__ import annotations

import enum
import json
import math
import random
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from scipy import stats

from ..data import HOMES_DIR
from ..model import DeviceInstance, Principal
from ..platform import PhysicalAction, Platform, load_catalog, load_config_templates, read_config

MIN_RUNS = 50
BENCH_HOME = HOMES_DIR / "testbed.json"

_TRACKER = Principal.third_party("tracker")
_LOCAL = Principal.local_user()

# physical actions that satisfy every check of the testbed's largest policy
_ENTRY = [
    ("lock-1", "unlock", (("method", "owner"),)),
    ("door-1", "open", ()),
    ("panel-1", "disarm", ()),
    ("motion-1", "walk-past", ()),
    ("presence-1", "detect", ()),
    ("beacon-1", "detect", ()),
    ("thermostat-1", "walk-past", ()),
]


class Suite(str, enum.Enum):
    MICRO = "micro"
    MACRO = "macro"
    ALL = "all"


def _routine(rid: str, aho: str, value: str, device: str, attr: str, target: str) -> dict:
    return {"id": rid, "when": {"aho": aho, "value": value},
            "then": {"device": device, "attribute": attr, "value": target}}


@dataclass
class Stats:
    n: int
    mean_ms: float
    std_ms: float
    ci95_ms: tuple[float, float]

    @classmethod
    def of(cls, samples_ms: list[float]) -> Stats:
        n = len(samples_ms)
        mean = statistics.fmean(samples_ms)
        std = statistics.stdev(samples_ms) if n > 1 else 0.0
        half = stats.t.ppf(0.975, n - 1) * std / math.sqrt(n) if n > 1 else 0.0
        return cls(n, mean, std, (mean - half, mean + half))


@dataclass
class OpResult:
    op: int
    name: str
    monitored: Stats
    baseline: Stats | None = None
    overhead_ms: float | None = None
    overhead_pct: float | None = None
    diff_ci95_ms: tuple[float, float] | None = None
    verdict: str | None = None
    evaluations: int = 0


@dataclass
class BenchReport:
    suite: str
    runs: int
    inner: int
    seed: int
    home: str
    policy_size: int
    operations: list[OpResult] = field(default_factory=list)

    def op(self, number: int) -> OpResult:
        return next(o for o in self.operations if o.op == number)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _welch_ci(a: list[float], b: list[float]) -> tuple[float, float]:
    """95% CI of mean(a) - mean(b) without assuming equal variances."""
    va, vb = statistics.variance(a) / len(a), statistics.variance(b) / len(b)
    diff = statistics.fmean(a) - statistics.fmean(b)
    se = math.sqrt(va + vb)
    if se == 0:
        return diff, diff
    df = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    half = stats.t.ppf(0.975, df) * se
    return diff - half, diff + half


class _Bench:
    """Prepared inputs shared by every run so that parsing never lands in a timed region."""

    def __init__(self, config: Path, seed: int):
        self.data, base = read_config(config)
        self.catalog = load_catalog(self.data["catalog"], base)
        self.templates = list(load_config_templates(self.data, base, self.catalog))
        self.rng = random.Random(seed)

    def boot(self, monitored: bool, routines: list[dict] | None = None) -> Platform:
        data = dict(self.data, routines=routines or [])
        return Platform.from_parts(data, self.catalog, self.templates, endorsement_enabled=monitored,
                                   keep_audit=False, keep_event_log=False)

    def satisfy_entry(self, p: Platform) -> None:
        for dev, verb, params in _ENTRY:
            p.apply_physical(PhysicalAction(dev, verb, params))


def _expect_applied(out) -> None:
    if not out.applied:
        raise RuntimeError(f"benchmark workload was not applied: {out.status.value} {out.reason or ''}")


Timed = Callable[[], None]
Reset = Callable[[], None]


def _op_boot(b: _Bench, monitored: bool):
    def timed():
        b.boot(monitored)
    return None, timed, None


def _op_runtime_update(b: _Bench, monitored: bool):
    p = b.boot(monitored)
    types = ["motion-sensor", "presence-sensor", "beacon", "door-sensor"]
    seq = iter(range(10 ** 9))
    state: dict = {}

    def timed():
        i = next(seq)
        dev = DeviceInstance(f"bench-{i}", b.rng.choice(types), b.rng.choice(["front-door", "hallway"]))
        state["dev"] = dev.id
        p.home.register_device(dev)

    def reset():
        p.home.remove_device(state["dev"])
    return p, timed, reset


def _op_non_endorsed(b: _Bench, monitored: bool):
    p = b.boot(monitored)
    flip = {"day": "night", "night": "day"}

    def timed():
        _expect_applied(p.set_aho(_TRACKER, "scene", flip[p.home.ahos["scene"].value]))
    return p, timed, None


def _op_endorsed(b: _Bench, monitored: bool, routines: list[dict] | None = None):
    p = b.boot(monitored, routines)
    b.satisfy_entry(p)

    def timed():
        _expect_applied(p.set_aho(_TRACKER, "home", "home"))

    def reset():
        _expect_applied(p.set_aho(_LOCAL, "home", "away"))
    return p, timed, reset


def _op_automation_endorsed(b: _Bench, monitored: bool):
    routines = [_routine("camera-off-home", "home", "home", "camera-1", "power", "OFF"),
                _routine("camera-on-away", "home", "away", "camera-1", "power", "ON")]
    return _op_endorsed(b, monitored, routines)


def _op_automation_non_endorsed(b: _Bench, monitored: bool):
    routines = [_routine("light-off-night", "scene", "night", "light-1", "power", "OFF"),
                _routine("light-on-day", "scene", "day", "light-1", "power", "ON")]
    p = b.boot(monitored, routines)

    def timed():
        _expect_applied(p.set_aho(_TRACKER, "scene", "night"))

    def reset():
        _expect_applied(p.set_aho(_LOCAL, "scene", "day"))
    return p, timed, reset


OPERATIONS = {
    1: ("boot policy instantiation", Suite.MICRO, _op_boot),
    2: ("runtime policy update", Suite.MICRO, _op_runtime_update),
    3: ("non-endorsed AHO change", Suite.MICRO, _op_non_endorsed),
    4: ("endorsed AHO change", Suite.MICRO, _op_endorsed),
    5: ("automation, endorsed AHO", Suite.MACRO, _op_automation_endorsed),
    6: ("automation, non-endorsed AHO", Suite.MACRO, _op_automation_non_endorsed),
}


def _measure(setup, bench: _Bench, monitored: bool, inner: int) -> tuple[float, int]:
    """One run: mean latency (ms) over ``inner`` repetitions, plus evaluations performed."""
    p, timed, reset = setup(bench, monitored)
    total = 0
    clock = time.perf_counter_ns
    for _ in range(inner):
        t0 = clock()
        timed()
        total += clock() - t0
        if reset is not None:
            reset()
    evals = p.engine.evaluations if p is not None else 0
    return total / inner / 1e6, evals


def run_bench(suite: Suite | str = Suite.MICRO, runs: int = MIN_RUNS, baseline: bool = True, inner: int = 20,
              seed: int = 0, config: str | Path = BENCH_HOME, ops: list[int] | None = None) -> BenchReport:
    suite = Suite(suite)
    if runs < MIN_RUNS:
        raise ValueError(f"need at least {MIN_RUNS} runs for a report")
    selected = ops or [n for n, (_, s, _) in OPERATIONS.items() if suite is Suite.ALL or s is suite]
    probe = _Bench(Path(config), seed).boot(True)
    size = max((pol.size for pol in probe.engine.active.values()), default=0)
    report = BenchReport(suite.value, runs, inner, seed, Path(config).name, size)
    for number in selected:
        name, _, setup = OPERATIONS[number]
        # identical workload seeds for both sides; sides alternate to spread drift evenly
        mon_bench, base_bench = _Bench(Path(config), seed), _Bench(Path(config), seed)
        n_inner = 1 if number == 1 else inner
        mon, base, evals = [], [], 0
        for _ in range(runs):
            if baseline:
                base.append(_measure(setup, base_bench, False, n_inner)[0])
            ms, e = _measure(setup, mon_bench, True, n_inner)
            mon.append(ms)
            evals += e
        res = OpResult(number, name, Stats.of(mon), evaluations=evals)
        if baseline:
            res.baseline = Stats.of(base)
            res.overhead_ms = res.monitored.mean_ms - res.baseline.mean_ms
            res.overhead_pct = 100.0 * res.overhead_ms / res.baseline.mean_ms
            res.diff_ci95_ms = _welch_ci(mon, base)
            lo, hi = res.diff_ci95_ms
            res.verdict = "no measurable overhead" if lo <= 0 <= hi else (
                "overhead" if lo > 0 else "faster than baseline")
        report.operations.append(res)
    return report


def format_report(report: BenchReport) -> str:
    lines = [f"suite={report.suite} runs={report.runs} inner={report.inner} home={report.home} "
             f"largest policy={report.policy_size} checks",
             f"{'op':>2}  {'operation':<30} {'baseline ms':>12} {'monitored ms':>13} {'overhead ms':>12} "
             f"{'%':>8}  verdict"]
    for o in report.operations:
        base = f"{o.baseline.mean_ms:12.4f}" if o.baseline else f"{'-':>12}"
        ovh = f"{o.overhead_ms:12.4f}" if o.overhead_ms is not None else f"{'-':>12}"
        pct = f"{o.overhead_pct:8.2f}" if o.overhead_pct is not None else f"{'-':>8}"
        lines.append(f"{o.op:>2}  {o.name:<30} {base} {o.monitored.mean_ms:13.4f} {ovh} {pct}  {o.verdict or ''}")
    return "\n".join(lines)
