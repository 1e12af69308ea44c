"""Requester context, target-side requirements over it, and fingerprints.

Context fields are addressed by dotted field paths such as ``geo.city`` or
``qos.max_latency_ms``. Unknown top-level keys in a context document are kept
as strings under ``extra`` and addressed as ``extra.<key>``.
"""

from __future__ import annotations

import hashlib
import ipaddress
import json
import math
from enum import Enum
from typing import Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import MalformedContext

EARTH_RADIUS_KM = 6371.0


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, frozen=True)


class GeoPoint(_Strict):
    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)
    city: str | None = None


class QoS(_Strict):
    max_latency_ms: float | None = Field(default=None, gt=0)
    min_throughput_mbps: float | None = Field(default=None, gt=0)


class UsagePattern(str, Enum):
    request_response = "request_response"
    streaming = "streaming"
    bulk_transfer = "bulk_transfer"
    session = "session"


class Usage(_Strict):
    pattern: UsagePattern | None = None
    est_bytes_per_op: float | None = Field(default=None, ge=0)
    ops_per_minute: float | None = Field(default=None, ge=0)


class CostBound(_Strict):
    max_cost_units: float | None = Field(default=None, ge=0)


_KNOWN_KEYS = {"geo", "topology_cidr", "qos", "usage", "cost", "extra"}


def _extra_value(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True, separators=(",", ":"))


class Context(_Strict):
    """Metadata a requester asserts about itself and its environment."""

    geo: GeoPoint | None = None
    topology_cidr: str | None = None
    qos: QoS | None = None
    usage: Usage | None = None
    cost: CostBound | None = None
    extra: dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _fold_unknown(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        unknown = {k: v for k, v in data.items() if k not in _KNOWN_KEYS}
        if not unknown:
            return data
        folded = {k: v for k, v in data.items() if k in _KNOWN_KEYS}
        extra = dict(folded.get("extra") or {})
        for key, value in unknown.items():
            extra.setdefault(str(key), _extra_value(value))
        folded["extra"] = extra
        return folded

    @field_validator("topology_cidr")
    @classmethod
    def _cidr(cls, v: str | None) -> str | None:
        if v is not None:
            try:
                ipaddress.ip_network(v, strict=False)
            except ValueError:
                raise ValueError(f"invalid CIDR {v!r}") from None
        return v

    def __hash__(self) -> int:  # extra is a dict, so the frozen default hash fails
        return hash(to_json_bytes(self.model_dump(mode="json", exclude_none=True)))


# Field-path schema: path -> value kind.
FIELD_KINDS: dict[str, str] = {
    "geo": "group",
    "geo.lat": "number",
    "geo.lon": "number",
    "geo.city": "string",
    "topology_cidr": "cidr",
    "qos": "group",
    "qos.max_latency_ms": "number",
    "qos.min_throughput_mbps": "number",
    "usage": "group",
    "usage.pattern": "enum",
    "usage.est_bytes_per_op": "number",
    "usage.ops_per_minute": "number",
    "cost": "group",
    "cost.max_cost_units": "number",
}

_PREDICATES_BY_KIND = {
    "number": {"equals", "max", "min"},
    "string": {"equals"},
    "enum": {"equals"},
    "cidr": {"equals", "within_cidr"},
    "group": set(),
}


def field_kind(path: str) -> str:
    if path.startswith("extra.") and len(path) > len("extra."):
        return "string"
    try:
        return FIELD_KINDS[path]
    except KeyError:
        raise MalformedContext(f"unknown context field {path!r}") from None


class _Absent:
    def __repr__(self) -> str:
        return "ABSENT"


ABSENT: Any = _Absent()


def get_field(ctx: Context, path: str) -> Any:
    """Value at ``path`` in ``ctx`` or ABSENT. Groups yield their JSON dict."""
    field_kind(path)
    head, _, rest = path.partition(".")
    if head == "extra":
        return ctx.extra.get(rest, ABSENT)
    value = getattr(ctx, head)
    if value is None:
        return ABSENT
    if not rest:
        if isinstance(value, BaseModel):
            return value.model_dump(mode="json", exclude_none=True)
        return value
    inner = getattr(value, rest)
    if inner is None:
        return ABSENT
    return inner.value if isinstance(inner, Enum) else inner


def set_fields(ctx: Context, values: dict[str, Any]) -> Context:
    """Return a copy of ``ctx`` with the given field paths assigned."""
    doc = ctx.model_dump(mode="json", exclude_none=True)
    for path, value in values.items():
        field_kind(path)
        head, _, rest = path.partition(".")
        if head == "extra":
            doc.setdefault("extra", {})[rest] = value
        elif not rest:
            doc[head] = value
        else:
            doc.setdefault(head, {})[rest] = value
    try:
        return Context.model_validate(doc)
    except ValueError as exc:
        raise MalformedContext(str(exc)) from None


class Restriction(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    field: str
    predicate: Literal["equals", "within_cidr", "max", "min"]
    value: Union[float, str]

    @model_validator(mode="after")
    def _typecheck(self) -> Restriction:
        kind = field_kind(self.field)
        if self.predicate not in _PREDICATES_BY_KIND[kind]:
            raise ValueError(f"predicate {self.predicate!r} does not apply to {self.field!r}")
        if kind == "number" and not isinstance(self.value, (int, float)):
            raise ValueError(f"{self.field!r} restriction needs a number")
        if kind != "number" and not isinstance(self.value, str):
            raise ValueError(f"{self.field!r} restriction needs a string")
        if self.predicate == "within_cidr":
            ipaddress.ip_network(self.value, strict=False)
        return self


class ContextRequirements(BaseModel):
    """What a target demands of a requester's context."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    required_fields: tuple[str, ...] = ()
    restrictions: tuple[Restriction, ...] = ()

    @field_validator("required_fields")
    @classmethod
    def _fields(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        for path in v:
            field_kind(path)
        return tuple(sorted(set(v)))

    def read_fields(self) -> set[str]:
        return set(self.required_fields) | {r.field for r in self.restrictions}

    def merged(self, other: ContextRequirements) -> ContextRequirements:
        return ContextRequirements(
            required_fields=(*self.required_fields, *other.required_fields),
            restrictions=(*self.restrictions, *(r for r in other.restrictions if r not in self.restrictions)),
        )


class Satisfaction(BaseModel):
    satisfied: bool
    missing: list[str]
    violated: list[int]


def cidr_contains(outer: str, inner: str) -> bool:
    a = ipaddress.ip_network(outer, strict=False)
    b = ipaddress.ip_network(inner, strict=False)
    return a.version == b.version and b.subnet_of(a)


def _holds(r: Restriction, value: Any) -> bool:
    if r.predicate == "equals":
        return value == r.value
    if r.predicate == "max":
        return value <= r.value
    if r.predicate == "min":
        return value >= r.value
    return cidr_contains(str(r.value), value)


def check_satisfaction(req: ContextRequirements, ctx: Context) -> Satisfaction:
    """Evaluate requirements against a context.

    A restriction on an absent field counts as violated, so supplying more
    context can only move a field from missing/violated to satisfied.
    """
    missing = [f for f in req.required_fields if get_field(ctx, f) is ABSENT]
    violated = []
    for i, r in enumerate(req.restrictions):
        value = get_field(ctx, r.field)
        if value is ABSENT or not _holds(r, value):
            violated.append(i)
    return Satisfaction(satisfied=not missing and not violated, missing=missing, violated=violated)


class ContextFingerprint(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    digest: str = Field(pattern=r"^[0-9a-f]{64}$")
    fields_covered: tuple[str, ...]


_ABSENT_MARKER = {"$absent": True}


def to_json_bytes(doc: Any) -> bytes:
    """Canonical JSON: sorted keys, no insignificant whitespace, UTF-8."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False).encode("utf-8")


def fingerprint(ctx: Context, fields: list[str] | tuple[str, ...]) -> ContextFingerprint:
    fields = tuple(fields)
    if list(fields) != sorted(set(fields)):
        raise MalformedContext("fingerprint fields must be sorted and duplicate-free")
    projected = {}
    for path in fields:
        value = get_field(ctx, path)
        projected[path] = _ABSENT_MARKER if value is ABSENT else value
    digest = hashlib.sha256(to_json_bytes(projected)).hexdigest()
    return ContextFingerprint(digest=digest, fields_covered=fields)


def haversine_km(a: Any, b: Any) -> float:
    """Great-circle distance between two ``{lat, lon}`` points."""
    lat1, lon1 = _latlon(a)
    lat2, lon2 = _latlon(b)
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def _latlon(p: Any) -> tuple[float, float]:
    if isinstance(p, dict):
        return float(p["lat"]), float(p["lon"])
    if isinstance(p, (tuple, list)):
        return float(p[0]), float(p[1])
    return float(p.lat), float(p.lon)


def merge_contexts(base: Context, overlay: Context | None) -> Context:
    """``base`` with every field present in ``overlay`` taking precedence."""
    if overlay is None:
        return base
    doc = base.model_dump(mode="json", exclude_none=True)
    top = overlay.model_dump(mode="json", exclude_none=True)
    extra = {**doc.get("extra", {}), **top.pop("extra", {})}
    for key, value in top.items():
        doc[key] = {**doc.get(key, {}), **value} if isinstance(value, dict) else value
    doc["extra"] = extra
    return Context.model_validate(doc)
