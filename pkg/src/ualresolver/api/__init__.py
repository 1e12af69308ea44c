"""FastAPI services: name server, AgentFacts registry, standalone resolver.

:func:`create_app` builds one of them from a role config document::

    {"role": "nameserver", "url": "https://lab15.example", "zones": ["ual:nanda.mit.edu:lab15"],
     "secret": "...", "resources": [...], "owners": {"acme": "https://setup.acme.example"}}
    {"role": "resolver", "roots": {"nanda.mit.edu": "https://root.example"}, "cache_size": 4096}
    {"role": "facts"}
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import FastAPI

from ..adaptive.models import Resource
from ..facts import FactsRegistry
from ..names import parse_zone
from ..nameserver import NameServer
from ..resolver import RecursiveResolver
from ..transport import HttpNetwork, HttpOwner
from .facts import create_facts_app
from .nameserver import create_nameserver_app
from .resolver import create_resolver_app

ROLES = ("nameserver", "resolver", "facts")


def create_app(config: dict[str, Any], *, zone_file: str | Path | None = None,
               facts_file: str | Path | None = None, roots: dict[str, str] | None = None,
               cache_size: int | None = None) -> FastAPI:
    role = config.get("role")
    if role == "nameserver":
        owners = {name: HttpOwner(url) for name, url in config.get("owners", {}).items()}
        server = NameServer(
            config["url"],
            [parse_zone(z) for z in config.get("zones", [])],
            secret=config.get("secret"),
            resources=[Resource.model_validate(r) for r in config.get("resources", [])],
            owners=owners,
            zone_file=zone_file or config.get("zone_file"),
        )
        return create_nameserver_app(server)
    if role == "resolver":
        resolver = RecursiveResolver(
            HttpNetwork(),
            {**config.get("roots", {}), **(roots or {})},
            cache_size=cache_size or config.get("cache_size", 4096),
        )
        return create_resolver_app(resolver)
    if role == "facts":
        return create_facts_app(FactsRegistry(path=facts_file or config.get("facts_file")))
    raise ValueError(f"unknown role {role!r}; expected one of {ROLES}")


__all__ = ["ROLES", "create_app", "create_facts_app", "create_nameserver_app", "create_resolver_app"]
