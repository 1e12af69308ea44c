"""Canonical JSON wire format shared by all services.

Every HTTP body is an envelope::

    {"body": {...}, "kind": "<message kind>", "ts": "<RFC3339>", "v": "ual/0.1"}

serialized with sorted keys and no insignificant whitespace. Bodies are the
JSON forms of the message types in :data:`MESSAGE_TYPES`, with ``null``
optional fields omitted.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .adaptive.models import (
    CommsSpec,
    NegotiationOffer,
    NegotiationReply,
    PlacementSpec,
    Resource,
    SessionView,
)
from .context import Context, ContextRequirements, to_json_bytes
from .errors import DecodeError, MalformedName, UalError, VersionMismatch
from .facts import AgentFactsCard
from .messages import NegotiationInvitation, Referral, ResolverAnswer, ResolverQuery, TailoredResponse
from .nameserver import AgentDeploymentRecord, StatusUpdate, ZoneRecord, ZoneRegistration
from .tailoring import EndpointCandidate

VERSION = "ual/0.1"


class UnknownKind(DecodeError):
    code = "unknown_kind"


class ErrorBody(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    code: str
    message: str
    detail: dict[str, Any] = Field(default_factory=dict)


class Ack(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    ok: bool = True
    detail: str | None = None


class Endpoints(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    session_id: str
    endpoints: dict[str, str]


class FactsList(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    cards: tuple[AgentFactsCard, ...] = ()


class OwnerSetup(BaseModel):
    """Request sent to a resource owner asking it to deploy its section."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    session_id: str
    section: dict[str, str]


MESSAGE_TYPES: dict[str, type[BaseModel]] = {
    "ack": Ack,
    "agent_deployment_record": AgentDeploymentRecord,
    "agent_facts_card": AgentFactsCard,
    "comms_spec": CommsSpec,
    "context": Context,
    "context_requirements": ContextRequirements,
    "endpoint_candidate": EndpointCandidate,
    "endpoints": Endpoints,
    "error": ErrorBody,
    "facts_list": FactsList,
    "negotiation_invitation": NegotiationInvitation,
    "negotiation_offer": NegotiationOffer,
    "negotiation_reply": NegotiationReply,
    "owner_setup": OwnerSetup,
    "placement_spec": PlacementSpec,
    "referral": Referral,
    "resolver_answer": ResolverAnswer,
    "resolver_query": ResolverQuery,
    "resource": Resource,
    "session_view": SessionView,
    "status_update": StatusUpdate,
    "tailored_response": TailoredResponse,
    "zone_record": ZoneRecord,
    "zone_registration": ZoneRegistration,
}

KIND_OF: dict[type[BaseModel], str] = {cls: kind for kind, cls in MESSAGE_TYPES.items()}

# Documented top-level body fields per message kind: (required, optional).
FIELD_TABLES: dict[str, tuple[frozenset[str], frozenset[str]]] = {
    "ack": (frozenset(), frozenset({"ok", "detail"})),
    "agent_deployment_record": (
        frozenset({"agent_name", "endpoints"}),
        frozenset({"context_fields_needed", "policy", "weights", "negotiation_required", "requirements",
                   "ttl_seconds", "role_field", "adaptive"}),
    ),
    "agent_facts_card": (
        frozenset({"agent_name", "ttl_seconds"}),
        frozenset({"label", "capabilities", "context_requirements", "published_at"}),
    ),
    "comms_spec": (
        frozenset({"session_id", "participants", "variables"}),
        frozenset({"constraints", "objective", "rounds"}),
    ),
    "context": (frozenset(), frozenset({"geo", "topology_cidr", "qos", "usage", "cost", "extra"})),
    "context_requirements": (frozenset(), frozenset({"required_fields", "restrictions"})),
    "endpoint_candidate": (
        frozenset({"url", "geo", "capacity_ops_per_s"}),
        frozenset({"current_load", "cost_units_per_op", "healthy", "role"}),
    ),
    "endpoints": (frozenset({"session_id", "endpoints"}), frozenset()),
    "error": (frozenset({"code", "message"}), frozenset({"detail"})),
    "facts_list": (frozenset(), frozenset({"cards"})),
    "negotiation_invitation": (
        frozenset({"session_id"}),
        frozenset({"missing_fields", "target_demands", "negotiation_url"}),
    ),
    "negotiation_offer": (
        frozenset({"session_id"}),
        frozenset({"requester_name", "supplied", "refused", "demands"}),
    ),
    "negotiation_reply": (
        frozenset({"session_id", "status"}),
        frozenset({"round", "missing", "disclosed", "comms_spec", "reason"}),
    ),
    "owner_setup": (frozenset({"session_id", "section"}), frozenset()),
    "placement_spec": (
        frozenset({"session_id", "assignment", "expected_cost", "expected_latency_ms"}),
        frozenset({"objective", "method", "endpoints"}),
    ),
    "referral": (frozenset({"zone", "next_server_url"}), frozenset({"ttl_seconds"})),
    "resolver_answer": (frozenset({"kind", "body"}), frozenset()),
    "resolver_query": (frozenset({"name"}), frozenset({"query_id", "context", "accept_negotiation"})),
    "resource": (
        frozenset({"resource_id", "owner", "geo", "capacity_units"}),
        frozenset({"kind", "cost_per_unit", "link_latency_ms", "capabilities", "throughput_mbps", "url"}),
    ),
    "session_view": (
        frozenset({"session_id", "state", "last_activity", "inactivity_timeout_s"}),
        frozenset({"endpoints"}),
    ),
    "status_update": (frozenset({"endpoint_url", "load"}), frozenset({"healthy"})),
    "tailored_response": (
        frozenset({"endpoint_url", "fingerprint", "policy_used"}),
        frozenset({"ttl_seconds", "session_id"}),
    ),
    "zone_record": (frozenset({"zone", "server_url"}), frozenset({"kind", "ttl_seconds"})),
    "zone_registration": (frozenset({"zone", "child_server_url"}), frozenset({"ttl_seconds", "kind"})),
}


class Envelope(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    v: str
    kind: str
    body: dict[str, Any]
    ts: str


def format_ts(epoch: float) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).isoformat(timespec="milliseconds").replace("+00:00", "Z")


def parse_ts(text: str) -> datetime:
    if not isinstance(text, str) or "T" not in text:
        raise DecodeError(f"invalid timestamp {text!r}")
    try:
        parsed = datetime.fromisoformat(text[:-1] + "+00:00" if text.endswith("Z") else text)
    except ValueError:
        raise DecodeError(f"invalid timestamp {text!r}") from None
    if parsed.tzinfo is None:
        raise DecodeError(f"timestamp {text!r} lacks a UTC offset")
    return parsed


def kind_of(message: BaseModel) -> str:
    try:
        return KIND_OF[type(message)]
    except KeyError:
        raise TypeError(f"{type(message).__name__} is not a wire message") from None


def body_of(message: BaseModel) -> dict[str, Any]:
    return message.model_dump(mode="json", exclude_none=True)


def encode(message: BaseModel, ts: float | str | None = None) -> bytes:
    """Canonical envelope bytes for ``message``."""
    if ts is None:
        ts = datetime.now(timezone.utc).timestamp()
    stamp = ts if isinstance(ts, str) else format_ts(ts)
    return to_json_bytes({"v": VERSION, "kind": kind_of(message), "body": body_of(message), "ts": stamp})


def decode_envelope(data: bytes | str) -> Envelope:
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise DecodeError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise DecodeError("envelope must be a JSON object")
    if "v" in doc and doc["v"] != VERSION:
        raise VersionMismatch(f"unsupported protocol version {doc['v']!r}", expected=VERSION)
    try:
        env = Envelope.model_validate(doc)
    except ValidationError as exc:
        raise DecodeError(f"invalid envelope: {exc}") from None
    if env.kind not in MESSAGE_TYPES:
        raise UnknownKind(f"unknown message kind {env.kind!r}")
    parse_ts(env.ts)
    return env


def decode_body(kind: str, body: dict[str, Any]) -> BaseModel:
    cls = MESSAGE_TYPES.get(kind)
    if cls is None:
        raise UnknownKind(f"unknown message kind {kind!r}")
    try:
        return cls.model_validate(body)
    except (ValidationError, MalformedName) as exc:
        raise DecodeError(f"invalid {kind} body: {exc}") from None
    except UalError as exc:
        raise DecodeError(f"invalid {kind} body: {exc.message}") from None


def decode(data: bytes | str, expect: str | tuple[str, ...] | None = None) -> BaseModel:
    env = decode_envelope(data)
    if expect is not None:
        allowed = (expect,) if isinstance(expect, str) else expect
        if env.kind not in allowed:
            raise DecodeError(f"expected {'/'.join(allowed)}, got {env.kind!r}")
    return decode_body(env.kind, env.body)


def canonicalize_bytes(data: bytes | str) -> bytes:
    """Re-encode an envelope canonically (decode, then encode with its own ts)."""
    env = decode_envelope(data)
    message = decode_body(env.kind, env.body)
    return encode(message, ts=env.ts)


def error_body(exc: UalError) -> ErrorBody:
    detail = {k: v for k, v in exc.detail.items() if isinstance(v, (str, int, float, bool, list, type(None)))}
    return ErrorBody(code=exc.code, message=exc.message, detail=detail)
