"""Scenario documents (schema ``ual-scenario/1``).

A scenario declares name servers and their delegations, agents (facts cards
and deployment records), resources and their owners, relays, a workload of
operations run in order against an injected clock, and declarative
assertions over the results.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..adaptive.models import Resource
from ..context import Context, ContextRequirements
from ..errors import ScenarioInvalid, UalError
from ..facts import AgentFactsCard
from ..names import ZonePath, canonicalize, parse_ual, parse_zone
from ..nameserver import AgentDeploymentRecord

SCHEMA = "ual-scenario/1"

_STRICT = ConfigDict(extra="forbid", frozen=True)


class ServerSpec(BaseModel):
    model_config = _STRICT

    url: str
    zones: tuple[str, ...] = Field(min_length=1)
    resources: tuple[Resource, ...] = ()
    referral_ttl: int = Field(default=300, gt=0)

    def zone_paths(self) -> list[ZonePath]:
        return [parse_zone(z) for z in self.zones]


class DelegationSpec(BaseModel):
    model_config = _STRICT

    parent: str
    zone: str
    child: str
    kind: Literal["delegation", "authoritative_delegation"] = "delegation"
    ttl_seconds: int = Field(default=300, gt=0)


class AgentSpec(BaseModel):
    model_config = _STRICT

    server: str
    record: AgentDeploymentRecord
    facts: AgentFactsCard | None = None
    # False models an agent behind a firewall that refuses inbound connections.
    inbound: bool = True


class OwnerSpec(BaseModel):
    model_config = _STRICT

    name: str
    fail: bool = False
    # Simulated setup time, applied to the injected clock.
    delay_s: float = Field(default=0.0, ge=0)


class RelaySpec(BaseModel):
    model_config = _STRICT

    url: str
    # Pass-through screening stub; it inspects nothing and only counts.
    screen: bool = False


class ResolveOp(BaseModel):
    model_config = _STRICT

    op: Literal["resolve"]
    id: str
    name: str
    context: Context = Field(default_factory=Context)
    private_context: Context | None = None
    repeat: int = Field(default=1, ge=1)
    resolver: str = "default"
    requester: str | None = None
    accept_negotiation: bool = True
    withheld: tuple[str, ...] = ()
    demands: ContextRequirements | None = None


class StatusOp(BaseModel):
    model_config = _STRICT

    op: Literal["status"]
    agent: str
    endpoint: str
    load: float = Field(ge=0)
    healthy: bool = True


class RecordOp(BaseModel):
    model_config = _STRICT

    op: Literal["record"]
    server: str
    record: AgentDeploymentRecord


class RelocateOp(BaseModel):
    """Move an agent's endpoints onto the resource a negotiated placement chose."""

    model_config = _STRICT

    op: Literal["relocate"]
    agent: str
    call: str
    component: str


class AdvanceOp(BaseModel):
    model_config = _STRICT

    op: Literal["advance"]
    seconds: float = Field(gt=0)


class ConnectOp(BaseModel):
    model_config = _STRICT

    op: Literal["connect"]
    id: str
    agent: str
    url: str | None = None
    call: str | None = None

    @model_validator(mode="after")
    def _target(self) -> ConnectOp:
        if (self.url is None) == (self.call is None):
            raise ValueError("connect needs exactly one of 'url' or 'call'")
        return self


class SweepOp(BaseModel):
    model_config = _STRICT

    op: Literal["sweep"]
    id: str
    server: str


Op = Annotated[Union[ResolveOp, StatusOp, RecordOp, RelocateOp, AdvanceOp, ConnectOp, SweepOp],
               Field(discriminator="op")]


class EndpointEquals(BaseModel):
    model_config = _STRICT
    check: Literal["endpoint_equals"]
    call: str
    url: str


class AllSameEndpoint(BaseModel):
    model_config = _STRICT
    check: Literal["all_same_endpoint"]
    calls: tuple[str, ...] = Field(min_length=1)


class NearestEndpoint(BaseModel):
    model_config = _STRICT
    check: Literal["nearest_endpoint"]
    call: str


class KindEquals(BaseModel):
    model_config = _STRICT
    check: Literal["kind_equals"]
    call: str
    # "tailored", "negotiated" or "error:<code>"
    kind: str


class LoadRatioMax(BaseModel):
    model_config = _STRICT
    check: Literal["load_ratio_max"]
    calls: tuple[str, ...] = Field(min_length=1)
    max_ratio: float = Field(ge=1)
    endpoints: tuple[str, ...] = ()


class ZeroSelections(BaseModel):
    model_config = _STRICT
    check: Literal["zero_selections"]
    url: str


class RelayConnected(BaseModel):
    model_config = _STRICT
    check: Literal["relay_connected"]
    relay: str
    agents: tuple[str, ...] = Field(min_length=1)


class Colocated(BaseModel):
    model_config = _STRICT
    check: Literal["colocated"]
    call: str
    components: tuple[str, ...] = Field(min_length=2)


class EndpointRole(BaseModel):
    model_config = _STRICT
    check: Literal["endpoint_role"]
    call: str
    role: str


class QueryCount(BaseModel):
    model_config = _STRICT
    check: Literal["query_count"]
    call: str
    # Which repetition of the call (0-based); defaults to every one.
    index: int | None = None
    equals: int = Field(ge=0)


class SweptCount(BaseModel):
    model_config = _STRICT
    check: Literal["swept_count"]
    sweep: str
    equals: int = Field(ge=0)


Assertion = Annotated[
    Union[EndpointEquals, AllSameEndpoint, NearestEndpoint, KindEquals, LoadRatioMax, ZeroSelections,
          RelayConnected, Colocated, EndpointRole, QueryCount, SweptCount],
    Field(discriminator="check"),
]


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    schema_: Literal["ual-scenario/1"] = Field(default=SCHEMA, alias="schema")
    name: str
    description: str = ""
    seed: int = 0
    start_time: float = 1_700_000_000.0
    servers: tuple[ServerSpec, ...] = Field(min_length=1)
    delegations: tuple[DelegationSpec, ...] = ()
    agents: tuple[AgentSpec, ...] = ()
    owners: tuple[OwnerSpec, ...] = ()
    relays: tuple[RelaySpec, ...] = ()
    workload: tuple[Op, ...] = ()
    assertions: tuple[Assertion, ...] = ()

    @model_validator(mode="after")
    def _references(self) -> Scenario:
        servers = {s.url for s in self.servers}
        if len(servers) != len(self.servers):
            raise ValueError("duplicate server url")
        for d in self.delegations:
            for url in (d.parent, d.child):
                if url not in servers:
                    raise ValueError(f"delegation references undeclared server {url}")
            parse_zone(d.zone)
        agents = {a.record.agent_name for a in self.agents}
        if len(agents) != len(self.agents):
            raise ValueError("duplicate agent")
        for a in self.agents:
            if a.server not in servers:
                raise ValueError(f"agent {a.record.agent_name} on undeclared server {a.server}")
        resource_ids = [r.resource_id for s in self.servers for r in s.resources]
        owners = {o.name for o in self.owners}
        for s in self.servers:
            for r in s.resources:
                if r.owner not in owners:
                    raise ValueError(f"resource {r.resource_id} has undeclared owner {r.owner}")
        for a in self.agents:
            if a.record.adaptive:
                for comp in a.record.adaptive.components:
                    unknown = set(comp.candidate_resource_ids) - set(resource_ids)
                    if unknown:
                        raise ValueError(f"{a.record.agent_name} references undeclared resources {sorted(unknown)}")

        ids: set[str] = set()
        sweeps: set[str] = set()
        for op in self.workload:
            if isinstance(op, (ResolveOp, ConnectOp, SweepOp)):
                if op.id in ids:
                    raise ValueError(f"duplicate op id {op.id}")
                ids.add(op.id)
            if isinstance(op, SweepOp):
                sweeps.add(op.id)
            if isinstance(op, (RecordOp, SweepOp)) and op.server not in servers:
                raise ValueError(f"op references undeclared server {op.server}")
            if isinstance(op, (StatusOp, RelocateOp)) and canonicalize(op.agent) not in agents:
                raise ValueError(f"op references undeclared agent {op.agent}")
            if isinstance(op, ResolveOp):
                parse_ual(op.name)
            if isinstance(op, (ConnectOp, RelocateOp)) and op.call is not None and op.call not in ids:
                raise ValueError(f"op references unknown or later call {op.call}")
        relays = {r.url for r in self.relays}
        for a in self.assertions:
            refs = list(getattr(a, "calls", ())) + ([a.call] if hasattr(a, "call") else [])
            for ref in refs:
                if ref not in ids:
                    raise ValueError(f"assertion {a.check} references unknown call {ref}")
            if isinstance(a, RelayConnected) and a.relay not in relays:
                raise ValueError(f"assertion references undeclared relay {a.relay}")
            if isinstance(a, SweptCount) and a.sweep not in sweeps:
                raise ValueError(f"assertion references unknown sweep {a.sweep}")
        return self


def load_scenario(source: str | Path | dict[str, Any]) -> Scenario:
    """Parse and validate a scenario; every failure becomes ScenarioInvalid."""
    try:
        doc = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    except (OSError, ValueError) as exc:
        raise ScenarioInvalid(f"cannot read scenario: {exc}") from None
    if isinstance(doc, dict) and doc.get("schema", SCHEMA) != SCHEMA:
        raise ScenarioInvalid(f"unsupported scenario schema {doc.get('schema')!r}")
    try:
        return Scenario.model_validate(doc)
    except ValidationError as exc:
        raise ScenarioInvalid(f"invalid scenario: {exc}") from None
    except UalError as exc:
        raise ScenarioInvalid(f"invalid scenario: {exc.message}") from None
