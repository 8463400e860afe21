"""Command line: ``he`` for the platform, ``spec`` for the policy toolkit.

``serve`` hosts the HTTP service; ``client`` talks to it. Scenario replay,
benchmarks and the policy toolkit run in-process because they are batch jobs
that own a fresh platform.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import HomeError

DEFAULT_URL = "http://127.0.0.1:8123"


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text + "\n")
    else:
        click.echo(text)


@click.group()
def main() -> None:
    """Endorsement-guarded smart-home platform."""


# -- serve --------------------------------------------------------------------

def _parse_listen(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise click.BadParameter(f"expected [host]:port, got {listen!r}") from None


@main.command()
@click.option("--config", "config", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--policies", "policies", multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Extra template files, in addition to those named by the config.")
@click.option("--listen", default=":8123", show_default=True, help="[host]:port")
@click.option("--manual-clock", is_flag=True, help="Advance logical time only via /sim/advance.")
def serve(config: str, policies: tuple[str, ...], listen: str, manual_clock: bool) -> None:
    """Boot the home from CONFIG and serve the HTTP API."""
    import uvicorn

    from .platform import Platform
    from .service.app import create_app

    host, port = _parse_listen(listen)
    platform = Platform.from_config(config, policies)
    uvicorn.run(create_app(platform, wall_clock=not manual_clock), host=host, port=port, log_level="info")


# -- scenario -----------------------------------------------------------------

@main.group()
def scenario() -> None:
    """Replay scenario scripts."""


@scenario.command("run")
@click.argument("scripts", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="Home config (default: from script).")
@click.option("--policies", multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--current-state", is_flag=True, help="Ablation: judge by current device state.")
@click.option("--json", "as_json", is_flag=True, help="Print full results as JSON.")
@click.option("--audit", is_flag=True, help="Print the audit log after each script.")
def scenario_run(scripts, config, policies, current_state, as_json, audit) -> None:
    """Run SCRIPTS; exit status 0 iff every expectation passes."""
    from .bench.scenario import run_scenario

    ok = True
    results = []
    for path in scripts:
        try:
            res = run_scenario(path, config, policies, use_current_state=current_state)
        except HomeError as exc:
            click.echo(f"ERROR {path}: {exc}", err=True)
            ok = False
            continue
        ok &= res.passed
        results.append(res.to_dict())
        if not as_json:
            verdict = "PASS" if res.passed else "FAIL"
            click.echo(f"{verdict} {res.script_id}: {' '.join(res.decisions)}")
            bad = res.first_failure
            if bad is not None:
                click.echo(f"  line {bad.line}: expected {bad.expected}, got {bad.actual}")
            for err in res.errors:
                click.echo(f"  error: {err}")
            if audit:
                click.echo(res.audit, nl=False)
    if as_json:
        click.echo(json.dumps(results, indent=2))
    sys.exit(0 if ok else 1)


# -- bench --------------------------------------------------------------------

@main.command()
@click.option("--suite", type=click.Choice(["micro", "macro", "all"]), default="micro", show_default=True)
@click.option("--baseline", is_flag=True, help="Also measure the endorsement-off baseline and report overhead.")
@click.option("--runs", default=50, show_default=True, type=click.IntRange(min=50))
@click.option("--inner", default=20, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="Benchmark home (default: testbed).")
@click.option("-o", "--output", type=click.Path(dir_okay=False))
def bench(suite, baseline, runs, inner, seed, config, output) -> None:
    """Measure operation latencies."""
    from .bench.harness import BENCH_HOME, format_report, run_bench

    report = run_bench(suite, runs=runs, baseline=baseline, inner=inner, seed=seed, config=config or BENCH_HOME)
    click.echo(format_report(report))
    if output:
        Path(output).write_text(report.to_json() + "\n")


# -- policy -------------------------------------------------------------------

@main.group()
def policy() -> None:
    """Inspect endorsement policies."""


@policy.command("show")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="Instantiate locally from a config.")
@click.option("--policies", multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--url", default=None, help=f"Query a running server instead (e.g. {DEFAULT_URL}).")
@click.option("--token", envvar="HE_TOKEN")
def policy_show(config, policies, url, token) -> None:
    """List active instantiated policies with their device bindings."""
    if config:
        from .platform import Platform

        p = Platform.from_config(config, policies)
        for _, pol in sorted(p.engine.active.items()):
            click.echo(f"{pol.describe()}    [{pol.template_id}]")
        for aho, value in sorted(p.engine.unprotectable):
            click.echo(f"P[{aho}={value}] = <none: third-party writes denied>")
        return
    data = _client(url or DEFAULT_URL, token).get("/api/policies")
    body = _checked(data)
    for pol in body["active"]:
        preds = []
        for pred in pol["predicates"]:
            inner = " & ".join(f"{c['device_id']}.{c['attribute']}=={c['value']}" for c in pred["checks"])
            preds.append(f"({inner})@{pred['location']}")
        click.echo(f"P[{pol['aho']}={pol['value']}] = {' | '.join(preds)}    [{pol['template_id']}]")
    for key in body["unprotectable"]:
        click.echo(f"P[{key}] = <none: third-party writes denied>")


# -- thin client --------------------------------------------------------------

def _client(url: str, token: str | None):
    import httpx

    if not token:
        raise click.UsageError("a bearer token is required (--token or HE_TOKEN)")
    return httpx.Client(base_url=url, headers={"Authorization": f"Bearer {token}"}, timeout=10.0)


def _checked(resp) -> dict:
    try:
        body = resp.json()
    except ValueError:
        body = {"detail": resp.text}
    if resp.status_code >= 400 and resp.status_code not in (403, 409):
        raise click.ClickException(f"HTTP {resp.status_code}: {body.get('detail', body)}")
    return body


def _report(resp) -> None:
    body = _checked(resp)
    click.echo(f"{resp.status_code} {json.dumps(body, sort_keys=True)}")
    if resp.status_code != 200:
        sys.exit(1)


@main.group()
@click.option("--url", default=DEFAULT_URL, show_default=True)
@click.option("--token", envvar="HE_TOKEN")
@click.pass_context
def client(ctx, url, token) -> None:
    """Talk to a running `he serve`."""
    ctx.obj = (url, token)


@client.command("aho")
@click.argument("name")
@click.argument("value")
@click.pass_obj
def client_aho(obj, name, value) -> None:
    """Request AHO NAME := VALUE."""
    _report(_client(*obj).post(f"/api/aho/{name}", json={"value": value}))


@client.command("device")
@click.argument("device_id")
@click.argument("attribute")
@click.argument("value")
@click.pass_obj
def client_device(obj, device_id, attribute, value) -> None:
    """Request DEVICE_ID.ATTRIBUTE := VALUE."""
    _report(_client(*obj).post(f"/api/device/{device_id}/{attribute}", json={"value": value}))


@client.command("states")
@click.pass_obj
def client_states(obj) -> None:
    click.echo(json.dumps(_checked(_client(*obj).get("/api/states")), indent=2))


@client.command("notifications")
@click.pass_obj
def client_notifications(obj) -> None:
    for n in _checked(_client(*obj).get("/api/notifications")):
        click.echo(f"#{n['seq']} t={n['time']} {n['kind']}: {n['message']}")
        for f in n["failed_checks"]:
            click.echo(f"    failed {f}")


@client.command("physical")
@click.argument("device")
@click.argument("verb")
@click.argument("params", nargs=-1)
@click.pass_obj
def client_physical(obj, device, verb, params) -> None:
    """Simulate a physical interaction (local token only)."""
    kv = dict(p.split("=", 1) for p in params)
    _report(_client(*obj).post("/sim/physical", json={"device": device, "verb": verb, "params": kv}))


@client.command("advance")
@click.argument("ms", type=int)
@click.pass_obj
def client_advance(obj, ms) -> None:
    """Advance logical time by MS milliseconds (local token only)."""
    _report(_client(*obj).post("/sim/advance", json={"ms": ms}))


# -- spec toolkit -------------------------------------------------------------

@click.group("spec")
def spec() -> None:
    """Device-attribute ingestion and policy-template generation."""


@spec.command("ingest")
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["auto", "OCF_JSON", "ATTR_LIST", "HANDLER_PREAMBLE"]),
              default="auto", show_default=True)
@click.option("--designated", type=click.Path(exists=True, dir_okay=False), help="Trust-class override file.")
@click.option("-o", "--output", type=click.Path(dir_okay=False))
def spec_ingest(files, fmt, designated, output) -> None:
    """Merge FILES into one device-attribute map."""
    from .errors import ConflictingTrustClass, ParseError
    from .spec.ingest import DeviceAttributeMap, guess_format, ingest, load_overrides

    merged = DeviceAttributeMap()
    try:
        for f in files:
            ingest(f, guess_format(f) if fmt == "auto" else fmt, into=merged)
        catalog = merged.resolve(load_overrides(designated))
    except (ParseError, ConflictingTrustClass) as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(f"{len(catalog.types)} device types, {len(catalog)} pairs, "
               f"{len(catalog.endorsement_attributes())} endorsement attributes", err=True)
    _write(json.dumps(catalog.to_dict(), indent=1), output)


def _load_map(path: str | None):
    from .data import dataset_catalog
    from .model import DeviceCatalog

    return DeviceCatalog.from_dict(json.loads(Path(path).read_text())) if path else dataset_catalog()


@spec.command("gen")
@click.option("--inferences", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--aho", help="Expected target AHO (checked against the file).")
@click.option("--value", help="Expected target value (checked against the file).")
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), help="Device-attribute map.")
@click.option("-o", "--output", type=click.Path(dir_okay=False))
def spec_gen(inferences, aho, value, map_path, output) -> None:
    """Generate one template per non-empty subset of the inferences."""
    from .policy import dump_templates
    from .spec.templates import generate_templates, load_inferences

    try:
        infs = load_inferences(inferences, _load_map(map_path))
        for i in infs:
            if (aho and i.aho != aho) or (value and i.target_value != value):
                raise click.ClickException(f"inference targets {i.aho}={i.target_value}, not {aho}={value}")
        templates = generate_templates(infs)
    except HomeError as exc:
        raise click.ClickException(str(exc)) from None
    sizes = [len(t.checks) for t in templates]
    click.echo(f"{len(templates)} templates, mean {sum(sizes) / len(sizes):.3f} checks, max {max(sizes)}", err=True)
    _write(dump_templates(templates), output)


@spec.command("filter")
@click.argument("templates_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--inferences", type=click.Path(exists=True, dir_okay=False), help="Needed for --min-strong.")
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--min-strong", type=int)
@click.option("--contains-pair")
@click.option("--max-size", type=int)
@click.option("-o", "--output", type=click.Path(dir_okay=False))
def spec_filter(templates_file, inferences, map_path, min_strong, contains_pair, max_size, output) -> None:
    """Filter a template file and print a count report."""
    from .policy import dump_templates, load_templates
    from .spec.templates import filter_templates, load_inferences

    if min_strong is not None and not inferences:
        raise click.UsageError("--min-strong needs --inferences to know which pairs are strong")
    infs = load_inferences(inferences, _load_map(map_path)) if inferences else []
    kept, report = filter_templates(load_templates(templates_file), infs, min_strong=min_strong,
                                    contains_pair=contains_pair, max_size=max_size)
    click.echo(json.dumps(report), err=True)
    _write(dump_templates(kept), output)


main.add_command(spec)


if __name__ == "__main__":
    main()
