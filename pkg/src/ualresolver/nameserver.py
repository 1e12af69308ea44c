"""Name server core: zone delegation, agent deployment records, query answering.

One :class:`NameServer` plays root, intermediate or authoritative roles
depending on which zones it owns and what it holds. A query is answered with
a tailored endpoint when the server holds the agent's deployment record, with
a referral when it has delegated a deeper zone covering the name, and with
NameNotFound otherwise.
"""

from __future__ import annotations

import hmac
import threading
import uuid
from pathlib import Path
from typing import Callable, Iterable, Literal
from urllib.parse import urlsplit

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .adaptive import AdaptiveProfile, Resource, ResourceOwner, SessionManager
from .clock import Clock, system_clock
from .context import ABSENT, Context, ContextRequirements, check_satisfaction, field_kind, fingerprint, get_field
from .errors import (
    MalformedName,
    MalformedQuery,
    MalformedRecord,
    NameNotFound,
    NoCandidates,
    NotFound,
    NotMyZone,
    Unauthorized,
    ZoneConflict,
)
from .messages import NegotiationInvitation, Referral, ResolverAnswer, ResolverQuery, TailoredResponse
from .names import AgentName, ZonePath, canonicalize, parse_ual
from .storage import atomic_write_json, read_json
from .tailoring import EndpointCandidate, Policy, PolicyInput, Rotation, Weights, policy_fields, select

DEFAULT_REFERRAL_TTL = 300
DEFAULT_TAILORED_TTL = 30
_LOOPBACK = {"127.0.0.1", "localhost", "::1"}


def check_server_url(url: str) -> str:
    """Server URLs must be https; plain http is tolerated on loopback only."""
    parts = urlsplit(url)
    if not parts.hostname:
        raise ValueError(f"server URL {url!r} has no host")
    if parts.scheme == "https" or (parts.scheme == "http" and parts.hostname in _LOOPBACK):
        return url.rstrip("/")
    raise ValueError(f"server URL {url!r} must use https")


class ZoneRecord(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    zone: ZonePath
    kind: Literal["delegation", "authoritative_delegation"] = "delegation"
    server_url: str
    ttl_seconds: int = Field(default=DEFAULT_REFERRAL_TTL, gt=0)

    @field_validator("server_url")
    @classmethod
    def _url(cls, v: str) -> str:
        return check_server_url(v)


class ZoneRegistration(BaseModel):
    """Body of a delegation request sent to the parent server."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    zone: ZonePath
    child_server_url: str
    ttl_seconds: int = Field(default=DEFAULT_REFERRAL_TTL, gt=0)
    kind: Literal["delegation", "authoritative_delegation"] = "delegation"


class AgentDeploymentRecord(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    agent_name: str
    endpoints: tuple[EndpointCandidate, ...]
    context_fields_needed: tuple[str, ...] = ()
    policy: Policy = Policy.static
    weights: Weights | None = None
    negotiation_required: bool = False
    requirements: ContextRequirements = Field(default_factory=ContextRequirements)
    ttl_seconds: int = Field(default=DEFAULT_TAILORED_TTL, ge=0)
    # Field path (e.g. "extra.role") whose value selects endpoints by role.
    role_field: str | None = None
    adaptive: AdaptiveProfile | None = None

    @field_validator("agent_name")
    @classmethod
    def _name(cls, v: str) -> str:
        return canonicalize(v)

    @field_validator("context_fields_needed")
    @classmethod
    def _fields(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        for path in v:
            field_kind(path)
        return tuple(sorted(set(v)))

    @model_validator(mode="after")
    def _consistent(self) -> AgentDeploymentRecord:
        if not self.endpoints:
            raise ValueError("a deployment record needs at least one endpoint")
        needed = policy_fields(self.policy, self.weights)
        if self.role_field:
            field_kind(self.role_field)
            needed.add(self.role_field)
        if not needed <= set(self.context_fields_needed):
            raise ValueError(f"context_fields_needed must include {sorted(needed)}")
        if len({e.url for e in self.endpoints}) != len(self.endpoints):
            raise ValueError("endpoint URLs must be unique within a record")
        if self.negotiation_required and self.adaptive is None:
            raise ValueError("negotiation_required needs an adaptive profile")
        return self

    def effective_requirements(self) -> ContextRequirements:
        extra = policy_fields(self.policy, self.weights)
        if self.role_field:
            extra.add(self.role_field)
        return self.requirements.merged(ContextRequirements(required_fields=tuple(extra)))


class StatusUpdate(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    endpoint_url: str
    load: float = Field(ge=0)
    healthy: bool = True


def record_from_json(doc: dict) -> AgentDeploymentRecord:
    try:
        return AgentDeploymentRecord.model_validate(doc)
    except (ValidationError, MalformedName) as exc:
        raise MalformedRecord(str(exc)) from None


class _Entry:
    __slots__ = ("record", "rotation", "status_at")

    def __init__(self, record: AgentDeploymentRecord) -> None:
        self.record = record
        self.rotation = Rotation()
        self.status_at: dict[str, float] = {}


class NameServer:
    """In-memory name server, optionally persisted to a JSON zone file."""

    def __init__(self, url: str, zones: Iterable[ZonePath], *, clock: Clock = system_clock,
                 secret: str | None = None, resources: Iterable[Resource] = (),
                 owners: dict[str, ResourceOwner] | None = None,
                 id_factory: Callable[[], str] = lambda: str(uuid.uuid4()),
                 referral_ttl: int = DEFAULT_REFERRAL_TTL,
                 zone_file: str | Path | None = None) -> None:
        self.url = check_server_url(url)
        self.zones = tuple(zones)
        if not self.zones:
            raise ValueError("a name server must own at least one zone")
        self.clock = clock
        self.secret = secret
        self.referral_ttl = referral_ttl
        self.resources: list[Resource] = list(resources)
        self.sessions = SessionManager(clock, lambda: self.resources, owners, id_factory)
        self._delegations: dict[ZonePath, ZoneRecord] = {}
        self._agents: dict[str, _Entry] = {}
        self._lock = threading.RLock()
        self._zone_file = Path(zone_file) if zone_file else None
        if self._zone_file and self._zone_file.exists():
            self.restore(read_json(self._zone_file))

    # -- registration -------------------------------------------------------

    def _authorize(self, secret: str | None) -> None:
        if self.secret is not None and not hmac.compare_digest(self.secret, secret or ""):
            raise Unauthorized("registration secret rejected")

    def owned_zone_for(self, target: ZonePath | AgentName) -> ZonePath | None:
        owned = [z for z in self.zones if z.is_prefix_of(target)]
        return max(owned, key=lambda z: z.depth, default=None)

    def register_zone(self, zone: ZonePath, child_url: str, ttl: int = DEFAULT_REFERRAL_TTL,
                      kind: str = "delegation", secret: str | None = None) -> ZoneRecord:
        self._authorize(secret)
        parent = self.owned_zone_for(zone)
        if parent is None or zone.depth != parent.depth + 1:
            raise NotMyZone(f"{self.url} cannot delegate {zone}")
        try:
            record = ZoneRecord(zone=zone, kind=kind, server_url=child_url, ttl_seconds=ttl)
        except ValidationError as exc:
            raise MalformedRecord(str(exc)) from None
        with self._lock:
            if zone in self._delegations:
                raise ZoneConflict(f"zone {zone} is already delegated to {self._delegations[zone].server_url}")
            if any(zone.is_prefix_of(parse_ual(name)) for name in self._agents):
                raise ZoneConflict(f"zone {zone} covers agents recorded here")
            self._delegations[zone] = record
            self._persist()
        return record

    def record_agent(self, record: AgentDeploymentRecord | dict, secret: str | None = None) -> AgentDeploymentRecord:
        self._authorize(secret)
        if isinstance(record, dict):
            record = record_from_json(record)
        name = parse_ual(record.agent_name)
        if self.owned_zone_for(name) is None:
            raise NotMyZone(f"{self.url} is not responsible for {record.agent_name}")
        with self._lock:
            delegated = self._covering_delegation(name)
            if delegated is not None:
                raise NotMyZone(f"{record.agent_name} lies in zone {delegated.zone} delegated to "
                                f"{delegated.server_url}")
            entry = _Entry(record)
            previous = self._agents.get(record.agent_name)
            if previous is not None:
                entry.rotation = previous.rotation
            self._agents[record.agent_name] = entry
            self._persist()
        return record

    def update_status(self, agent_name: str, endpoint_url: str, load: float, healthy: bool) -> EndpointCandidate:
        key = canonicalize(agent_name)
        with self._lock:
            entry = self._agents.get(key)
            if entry is None:
                raise NotFound(f"no deployment record for {key}")
            endpoints = list(entry.record.endpoints)
            for i, e in enumerate(endpoints):
                if e.url == endpoint_url:
                    try:
                        endpoints[i] = EndpointCandidate.model_validate(
                            {**e.model_dump(), "current_load": load, "healthy": healthy})
                    except ValidationError as exc:
                        raise MalformedRecord(str(exc)) from None
                    break
            else:
                raise NotFound(f"{key} has no endpoint {endpoint_url}")
            entry.record = entry.record.model_copy(update={"endpoints": tuple(endpoints)})
            entry.status_at[endpoint_url] = self.clock()
            self._persist()
            return endpoints[i]

    def get_record(self, agent_name: str) -> AgentDeploymentRecord:
        entry = self._agents.get(canonicalize(agent_name))
        if entry is None:
            raise NotFound(f"no deployment record for {agent_name}")
        return entry.record

    def delegations(self) -> list[ZoneRecord]:
        with self._lock:
            return sorted(self._delegations.values(), key=lambda r: r.zone.labels)

    # -- resolution ---------------------------------------------------------

    def _covering_delegation(self, name: AgentName) -> ZoneRecord | None:
        owned = self.owned_zone_for(name)
        best = None
        for zone, rec in self._delegations.items():
            if zone.is_prefix_of(name) and (owned is None or zone.depth > owned.depth):
                if best is None or zone.depth > best.zone.depth:
                    best = rec
        return best

    def answer_query(self, query: ResolverQuery | dict) -> ResolverAnswer:
        if isinstance(query, dict):
            try:
                query = ResolverQuery.model_validate(query)
            except (ValidationError, MalformedName) as exc:
                raise MalformedQuery(str(exc)) from None
        name = parse_ual(query.name)
        with self._lock:
            if self.owned_zone_for(name) is None:
                raise NameNotFound(f"{self.url} does not serve {query.name}")
            entry = self._agents.get(query.name)
            if entry is None:
                delegation = self._covering_delegation(name)
                if delegation is None:
                    raise NameNotFound(f"{query.name} is not known to {self.url}")
                return ResolverAnswer.of(Referral(zone=delegation.zone, next_server_url=delegation.server_url,
                                                  ttl_seconds=delegation.ttl_seconds))
            record, rotation = entry.record, entry.rotation
        return ResolverAnswer.of(self._authoritative(record, rotation, query))

    def _authoritative(self, record: AgentDeploymentRecord, rotation: Rotation,
                       query: ResolverQuery) -> TailoredResponse | NegotiationInvitation:
        ctx = query.context
        demands = record.effective_requirements()
        sat = check_satisfaction(demands, ctx)
        if record.negotiation_required or not sat.satisfied:
            url = None
            if record.adaptive is not None and query.accept_negotiation:
                sid = self.sessions.open(record.agent_name, record.adaptive, demands, ctx).session_id
                url = f"{self.url}/sessions/{sid}"
            else:
                sid = self.sessions.new_id()
            return NegotiationInvitation(session_id=sid, missing_fields=tuple(sat.missing),
                                         target_demands=demands, negotiation_url=url)

        candidates = [e for e in record.endpoints if e.healthy]
        if record.role_field:
            role = _role_of(ctx, record.role_field)
            candidates = [e for e in candidates if e.role == role]
        if not candidates:
            raise NoCandidates(f"no healthy endpoint for {record.agent_name}")
        chosen = select(record.policy, PolicyInput(candidates=tuple(candidates), requester_ctx=ctx,
                                                    weights=record.weights), rotation)
        covered = sorted(set(record.context_fields_needed) | demands.read_fields())
        return TailoredResponse(endpoint_url=chosen.url, ttl_seconds=record.ttl_seconds,
                                fingerprint=fingerprint(ctx, covered), policy_used=record.policy)

    # -- persistence --------------------------------------------------------

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "url": self.url,
                "zones": [z.model_dump(mode="json") for z in self.zones],
                "delegations": [r.model_dump(mode="json") for r in self.delegations()],
                "agents": [self._agents[k].record.model_dump(mode="json", exclude_none=True)
                           for k in sorted(self._agents)],
                "resources": [r.model_dump(mode="json", exclude_none=True) for r in self.resources],
            }

    def restore(self, doc: dict) -> None:
        with self._lock:
            for raw in doc.get("delegations", []):
                rec = ZoneRecord.model_validate(raw)
                self._delegations[rec.zone] = rec
            for raw in doc.get("agents", []):
                rec = record_from_json(raw)
                self._agents[rec.agent_name] = _Entry(rec)
            if doc.get("resources"):
                self.resources = [Resource.model_validate(r) for r in doc["resources"]]

    def _persist(self) -> None:
        if self._zone_file is not None:
            atomic_write_json(self._zone_file, self.snapshot())


def _role_of(ctx: Context, path: str) -> str | None:
    value = get_field(ctx, path)
    return None if value is ABSENT else str(value)
