"""``ual`` command-line tool.

Every subcommand maps onto one library or service operation. Exit codes:
0 on success, 1 on a domain error, 2 on a usage error (including malformed
names and context given on the command line).
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any

import click
from pydantic import BaseModel, ValidationError

from . import wire
from .context import Context, set_fields
from .errors import MalformedContext, MalformedName, OutOfRange, UalError
from .facts import card_from_json
from .messages import ResolverQuery
from .names import canonicalize
from .nameserver import ZoneRegistration, record_from_json
from .resolver import RecursiveResolver
from .transport import HttpClient, HttpNetwork, default_client

ROOTS_ENV = "UAL_ROOTS"
USAGE_ERRORS = (MalformedName, MalformedContext, OutOfRange)


def _fail(exc: UalError) -> None:
    if isinstance(exc, USAGE_ERRORS):
        raise click.UsageError(f"{exc.code}: {exc.message}")
    click.echo(f"error: {exc.code}: {exc.message}", err=True)
    sys.exit(1)


def _read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise click.UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise click.UsageError(f"{path} is not valid JSON: {exc}") from None


def _emit(message: BaseModel, as_json: bool) -> None:
    body = wire.body_of(message)
    if as_json:
        click.echo(json.dumps(body, sort_keys=True, indent=2))
        return
    width = max((len(k) for k in body), default=0)
    for key, value in body.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        click.echo(f"{key:<{width}}  {value}")


def _client(ctx: click.Context, secret: str | None = None) -> HttpClient:
    return HttpClient(ctx.obj.get("client_factory", default_client), secret=secret)


@click.group()
@click.option("-v", "--verbose", count=True, help="Log more (repeatable).")
@click.pass_context
def main(ctx: click.Context, verbose: int) -> None:
    """Resolve and operate UAL agent names."""
    ctx.ensure_object(dict)
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8053, show_default=True, type=int)
@click.option("--zone-file", type=click.Path(dir_okay=False), help="Persist name server state here.")
@click.option("--facts-file", type=click.Path(dir_okay=False), help="Persist facts cards here.")
@click.option("--roots", "roots_file", type=click.Path(exists=True, dir_okay=False), envvar=ROOTS_ENV,
              help="Roots file for the resolver role.")
def serve(config: str, host: str, port: int, zone_file: str | None, facts_file: str | None,
          roots_file: str | None) -> None:
    """Run a name server, resolver or facts registry from a role config."""
    import uvicorn

    from .api import create_app

    doc = _read_json(config)
    roots = _read_json(roots_file) if roots_file else None
    try:
        app = create_app(doc, zone_file=zone_file, facts_file=facts_file, roots=roots)
    except (KeyError, ValueError) as exc:
        raise click.UsageError(f"bad role config: {exc}") from None
    uvicorn.run(app, host=host, port=port)


def _build_context(context_file: str | None, lat: float | None, lon: float | None, city: str | None,
                   cidr: str | None) -> Context:
    try:
        context = Context.model_validate(_read_json(context_file)) if context_file else Context()
    except ValidationError as exc:
        raise click.UsageError(f"invalid context: {exc.errors()[0]['msg']}") from None
    if (lat is None) != (lon is None):
        raise click.UsageError("--lat and --lon go together")
    values: dict[str, Any] = {}
    if lat is not None:
        values["geo"] = {"lat": lat, "lon": lon, **({"city": city} if city else {})}
    elif city:
        values["geo.city"] = city
    if cidr:
        values["topology_cidr"] = cidr
    return set_fields(context, values) if values else context


@main.command()
@click.argument("name")
@click.option("--lat", type=float)
@click.option("--lon", type=float)
@click.option("--city")
@click.option("--cidr", help="Requester topology, e.g. 10.1.0.0/16.")
@click.option("--context-file", type=click.Path(exists=True, dir_okay=False), help="Full context JSON.")
@click.option("--private-context-file", type=click.Path(exists=True, dir_okay=False),
              help="Context disclosed only when the target demands it.")
@click.option("--roots", "roots_file", type=click.Path(exists=True, dir_okay=False), envvar=ROOTS_ENV,
              help="JSON map of namespace id to root server URL.")
@click.option("--resolver", "resolver_url", help="Use a resolver service instead of resolving locally.")
@click.option("--no-negotiate", is_flag=True, help="Fail instead of negotiating.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def resolve(ctx: click.Context, name: str, lat: float | None, lon: float | None, city: str | None,
            cidr: str | None, context_file: str | None, private_context_file: str | None,
            roots_file: str | None, resolver_url: str | None, no_negotiate: bool, as_json: bool) -> None:
    """Resolve NAME to a tailored endpoint."""
    try:
        key = canonicalize(name)
        context = _build_context(context_file, lat, lon, city, cidr)
        private = Context.model_validate(_read_json(private_context_file)) if private_context_file else None
    except UalError as exc:
        _fail(exc)
    except ValidationError as exc:
        raise click.UsageError(f"invalid private context: {exc.errors()[0]['msg']}") from None
    factory = ctx.obj.get("client_factory", default_client)
    try:
        if resolver_url:
            query = ResolverQuery(name=key, context=context, accept_negotiation=not no_negotiate)
            response = HttpClient(factory).call("POST", resolver_url.rstrip("/") + "/resolve", query,
                                                expect="tailored_response")
        else:
            roots = _read_json(roots_file) if roots_file else {}
            resolver = RecursiveResolver(HttpNetwork(factory), roots)
            response = resolver.resolve(key, context, private_context=private,
                                        accept_negotiation=not no_negotiate)
    except UalError as exc:
        _fail(exc)
    _emit(response, as_json)


@main.group()
def register() -> None:
    """Register zones, deployment records and facts cards."""


_secret = click.option("--secret", envvar="UAL_SECRET", help="Shared registration secret.")
_server = click.option("--server", required=True, help="Base URL of the receiving server.")


def _load(factory, path: str):
    try:
        return factory(_read_json(path))
    except ValidationError as exc:
        raise click.UsageError(f"{path}: {exc.errors()[0]['msg']}") from None
    except UalError as exc:
        raise click.UsageError(f"{path}: {exc.message}") from None


@register.command("zone")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@_server
@_secret
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def register_zone(ctx: click.Context, file: str, server: str, secret: str | None, as_json: bool) -> None:
    """Delegate a child zone on its parent SERVER."""
    reg = _load(ZoneRegistration.model_validate, file)
    try:
        _emit(_client(ctx, secret).call("POST", server.rstrip("/") + "/zones", reg, expect="zone_record"), as_json)
    except UalError as exc:
        _fail(exc)


@register.command("agent")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@_server
@_secret
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def register_agent(ctx: click.Context, file: str, server: str, secret: str | None, as_json: bool) -> None:
    """Record an agent deployment on its authoritative SERVER."""
    record = _load(record_from_json, file)
    url = f"{server.rstrip('/')}/agents/{record.agent_name}"
    try:
        _emit(_client(ctx, secret).call("PUT", url, record, expect="agent_deployment_record"), as_json)
    except UalError as exc:
        _fail(exc)


@register.command("facts")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@_server
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def register_facts(ctx: click.Context, file: str, server: str, as_json: bool) -> None:
    """Publish an AgentFacts card to the registry at SERVER."""
    card = _load(card_from_json, file)
    url = f"{server.rstrip('/')}/facts/{card.agent_name}"
    try:
        _emit(_client(ctx).call("PUT", url, card, expect="agent_facts_card"), as_json)
    except UalError as exc:
        _fail(exc)


@main.group()
def facts() -> None:
    """Query the AgentFacts registry."""


@facts.command("get")
@click.argument("name")
@_server
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def facts_get(ctx: click.Context, name: str, server: str, as_json: bool) -> None:
    """Fetch the live card for NAME."""
    try:
        key = canonicalize(name)
        _emit(_client(ctx).call("GET", f"{server.rstrip('/')}/facts/{key}", expect="agent_facts_card"), as_json)
    except UalError as exc:
        _fail(exc)


@facts.command("find")
@click.option("--tag", required=True)
@_server
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def facts_find(ctx: click.Context, tag: str, server: str, as_json: bool) -> None:
    """List live cards advertising capability TAG."""
    try:
        found = _client(ctx).call("GET", f"{server.rstrip('/')}/facts?tag={tag}", expect="facts_list")
    except UalError as exc:
        _fail(exc)
    if as_json:
        _emit(found, True)
    else:
        for card in found.cards:
            click.echo(f"{card.agent_name}  {','.join(card.capabilities)}")


@main.group()
def scenario() -> None:
    """Run simulated deployment scenarios."""


@scenario.command("run")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def scenario_run(file: str, as_json: bool) -> None:
    """Run FILE; exit 0 only if every assertion passes."""
    from .sim import run_scenario

    try:
        report = run_scenario(file, raise_on_failure=False)
    except UalError as exc:
        _fail(exc)
    click.echo(report.to_json().decode() if as_json else report.to_text().rstrip("\n"))
    sys.exit(0 if report.passed else 1)


if __name__ == "__main__":  # pragma: no cover
    main()
