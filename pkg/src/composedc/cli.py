"""Thin command-line client of the placement service.

Subcommands mirror the service endpoints: ``layout``, ``generate``,
``heep``, ``solve``, ``export-lp``, ``sweep`` and ``compare``. By default
requests run against an in-process copy of the app; pass ``--server`` to
talk to a remote deployment instead. ``serve`` starts a local server.

Exit status is nonzero when any sweep cell errored.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx


def _client(server: Optional[str]) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # In-process mode: drive the ASGI app directly through the test client,
    # which provides the synchronous transport wiring.
    from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(server: Optional[str], path: str, payload: dict) -> dict:
    with _client(server) as client:
        response = client.post(path, json=payload)
        if response.status_code != 200:
            raise click.ClickException(
                f"{path} failed ({response.status_code}): {response.text}"
            )
        return response.json()


def _emit(data, output: Optional[str]) -> None:
    text = data if isinstance(data, str) else json.dumps(data, indent=2)
    if output:
        Path(output).write_text(text)
        click.echo(f"wrote {output}")
    else:
        click.echo(text)


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx: click.Context, server: Optional[str]) -> None:
    """Composable DC power modeling and workload placement."""
    ctx.obj = {"server": server}


@main.command()
@click.option("--dc-kind", default="traditional", show_default=True)
@click.option("--pods", default=2, show_default=True)
@click.option("--racks-per-pod", default=2, show_default=True)
@click.option("--servers-per-class-per-rack", default=2, show_default=True)
@click.option("--output", "-o", default=None, help="Write JSON here.")
@click.pass_context
def layout(ctx, dc_kind, pods, racks_per_pod, servers_per_class_per_rack,
           output):
    """Build a reference layout and print its structure."""
    data = _post(ctx.obj["server"], "/layout", {
        "dc_kind": dc_kind, "pods": pods, "racks_per_pod": racks_per_pod,
        "servers_per_class_per_rack": servers_per_class_per_rack,
    })
    _emit(data, output)


@main.command()
@click.option("--count", default=20, show_default=True)
@click.option("--wclass", default="cpu-intensive", show_default=True)
@click.option("--group-size", default=5, show_default=True)
@click.option("--pattern", default="many-to-many", show_default=True)
@click.option("--shuffle-intensity", default="non-intensive", show_default=True,
              help="non-intensive, intensive, or 'none'.")
@click.option("--seed", default=0, show_default=True)
@click.option("--output", "-o", default=None)
@click.pass_context
def generate(ctx, count, wclass, group_size, pattern, shuffle_intensity, seed,
             output):
    """Draw a seeded workload set with its shuffle matrix."""
    data = _post(ctx.obj["server"], "/workloads/generate", {
        "count": count, "wclass": wclass, "group_size": group_size,
        "pattern": pattern,
        "shuffle_intensity": None if shuffle_intensity == "none"
        else shuffle_intensity,
        "seed": seed,
    })
    _emit(data, output)


def _cell_payload(dc_kind, fabric, count, wclass, seed, alpha, pattern,
                  shuffle_intensity, group_size, server):
    gen = _post(server, "/workloads/generate", {
        "count": count, "wclass": wclass, "group_size": group_size,
        "pattern": pattern,
        "shuffle_intensity": None if shuffle_intensity == "none"
        else shuffle_intensity,
        "seed": seed,
    })
    return {
        "layout": {"dc_kind": dc_kind},
        "fabric_kind": fabric,
        "alpha": alpha,
        "workloads": gen["workloads"],
        "shuffle": gen["shuffle"],
    }


_cell_options = [
    click.option("--dc-kind", default="traditional", show_default=True),
    click.option("--fabric", default="optical", show_default=True),
    click.option("--count", default=20, show_default=True),
    click.option("--wclass", default="cpu-intensive", show_default=True),
    click.option("--seed", default=0, show_default=True),
    click.option("--alpha", default=2000.0, show_default=True),
    click.option("--pattern", default="many-to-many", show_default=True),
    click.option("--shuffle-intensity", default="non-intensive",
                 show_default=True),
    click.option("--group-size", default=5, show_default=True),
    click.option("--output", "-o", default=None),
]


def _with_cell_options(fn):
    for option in reversed(_cell_options):
        fn = option(fn)
    return fn


@main.command()
@_with_cell_options
@click.pass_context
def heep(ctx, dc_kind, fabric, count, wclass, seed, alpha, pattern,
         shuffle_intensity, group_size, output):
    """Greedy placement of a generated workload set."""
    payload = _cell_payload(dc_kind, fabric, count, wclass, seed, alpha,
                            pattern, shuffle_intensity, group_size,
                            ctx.obj["server"])
    data = _post(ctx.obj["server"], "/place/heep", payload)
    _emit(data, output)


@main.command()
@_with_cell_options
@click.option("--max-nodes", default=500_000, show_default=True)
@click.option("--max-seconds", default=None, type=float)
@click.pass_context
def solve(ctx, dc_kind, fabric, count, wclass, seed, alpha, pattern,
          shuffle_intensity, group_size, output, max_nodes, max_seconds):
    """Exact placement of a generated workload set."""
    payload = _cell_payload(dc_kind, fabric, count, wclass, seed, alpha,
                            pattern, shuffle_intensity, group_size,
                            ctx.obj["server"])
    payload["max_nodes"] = max_nodes
    payload["max_seconds"] = max_seconds
    data = _post(ctx.obj["server"], "/place/exact", payload)
    _emit(data, output)


@main.command("export-lp")
@_with_cell_options
@click.pass_context
def export_lp(ctx, dc_kind, fabric, count, wclass, seed, alpha, pattern,
              shuffle_intensity, group_size, output):
    """Emit the full placement program as CPLEX LP text."""
    payload = _cell_payload(dc_kind, fabric, count, wclass, seed, alpha,
                            pattern, shuffle_intensity, group_size,
                            ctx.obj["server"])
    data = _post(ctx.obj["server"], "/export/lp", payload)
    if output:
        Path(output).write_text(data["lp"])
        click.echo(f"wrote {output} ({data['variables']} variables, "
                   f"{data['constraints']} constraints)")
    else:
        click.echo(data["lp"])


@main.command()
@click.argument("scenario_file", type=click.Path(exists=True))
@click.option("--output", "-o", default=None, help="CSV output path.")
@click.option("--json-output", default=None, help="Full JSON rows path.")
@click.pass_context
def sweep(ctx, scenario_file, output, json_output):
    """Run every scenario in a YAML scenario file."""
    from .scenario import scenarios_from_yaml

    scenarios = scenarios_from_yaml(Path(scenario_file).read_text())
    payload = {"scenarios": [s.to_dict() for s in scenarios]}
    for item in payload["scenarios"]:
        item.pop("schema_version", None)
    data = _post(ctx.obj["server"], "/sweep", payload)
    if output:
        Path(output).write_text(data["csv"])
        click.echo(f"wrote {output} ({len(data['rows'])} rows)")
    else:
        click.echo(data["csv"])
    if json_output:
        Path(json_output).write_text(json.dumps(data["rows"], indent=2))
        click.echo(f"wrote {json_output}")
    if data["any_error"]:
        raise click.ClickException("one or more sweep cells errored")


@main.command()
@click.argument("baseline_json", type=click.Path(exists=True))
@click.argument("other_json", type=click.Path(exists=True))
@click.option("--metrics", default="tdpc", show_default=True,
              help="Comma-separated report metrics.")
@click.option("--output", "-o", default=None)
@click.pass_context
def compare(ctx, baseline_json, other_json, metrics, output):
    """Percentage deltas between two sweep outputs (JSON row files)."""
    baseline = json.loads(Path(baseline_json).read_text())
    other = json.loads(Path(other_json).read_text())
    strip = lambda rows: [
        {k: v for k, v in r.items() if k not in ("decision_log", "placement")}
        for r in rows
    ]
    data = _post(ctx.obj["server"], "/compare", {
        "baseline": strip(baseline), "other": strip(other),
        "metrics": metrics.split(","),
    })
    _emit(data, output)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the placement service with uvicorn."""
    import uvicorn

    uvicorn.run("composedc.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
