"""Uniform Agent Locator (UAL) grammar.

Canonical text form is ``ual:<nid>:<label>:<label>...``. The namespace id is
a DNS name that also locates the namespace's root name server. Several surface
spellings are accepted on input and all normalize to the canonical form::

    ual:nanda.mit.edu:lab15:robot42
    ual:nanda.mit.edu/lab15/robot42
    agent:nanda.mit.edu:lab15:robot42
    agent://nanda.mit.edu/lab15/robot42
    urn:agent:nanda.mit.edu:lab15:robot42
    @nanda.mit.edu:lab15:robot42
"""

from __future__ import annotations

import re

from pydantic import BaseModel, ConfigDict, field_validator

from .errors import MalformedName, OutOfRange

SCHEME = "ual"
MAX_DEPTH = 8
MAX_NID_LENGTH = 253

_DNS_LABEL = re.compile(r"^[a-z0-9]([a-z0-9-]{0,61}[a-z0-9])?$")
_PATH_LABEL = re.compile(r"^[a-z0-9_-]{1,63}$")

# Longest prefixes first so "agent://" wins over "agent:".
_PREFIXES = ("urn:agent:", "agent://", "ual://", "agent:", "ual:", "@")


def validate_nid(nid: str) -> str:
    """Return the case-folded namespace id or raise MalformedName."""
    if not isinstance(nid, str):
        raise MalformedName(f"namespace id must be a string, got {type(nid).__name__}")
    folded = nid.lower()
    if not folded or len(folded) > MAX_NID_LENGTH:
        raise MalformedName(f"invalid namespace id {nid!r}")
    for label in folded.split("."):
        if not _DNS_LABEL.match(label):
            raise MalformedName(f"invalid namespace id {nid!r}: bad label {label!r}")
    return folded


def validate_label(label: str) -> str:
    folded = label.lower()
    if not _PATH_LABEL.match(folded):
        raise MalformedName(f"invalid path label {label!r}")
    return folded


class ZonePath(BaseModel):
    """A prefix of the name hierarchy inside one namespace.

    The empty label tuple is the namespace's root zone.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    nid: str
    labels: tuple[str, ...] = ()

    @field_validator("nid")
    @classmethod
    def _nid(cls, v: str) -> str:
        return validate_nid(v)

    @field_validator("labels")
    @classmethod
    def _labels(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        if len(v) > MAX_DEPTH:
            raise MalformedName(f"zone depth {len(v)} exceeds {MAX_DEPTH}")
        return tuple(validate_label(x) for x in v)

    @property
    def depth(self) -> int:
        return len(self.labels)

    def is_prefix_of(self, other: ZonePath | AgentName) -> bool:
        """True when this zone contains ``other`` (equal zones included)."""
        labels = other.labels if isinstance(other, ZonePath) else other.path
        return other.nid == self.nid and labels[: len(self.labels)] == self.labels

    def child(self, label: str) -> ZonePath:
        return ZonePath(nid=self.nid, labels=(*self.labels, label))

    def __str__(self) -> str:
        return ":".join((SCHEME, self.nid, *self.labels))


class AgentName(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    scheme: str = SCHEME
    nid: str
    path: tuple[str, ...]

    @field_validator("scheme")
    @classmethod
    def _scheme(cls, v: str) -> str:
        if v != SCHEME:
            raise MalformedName(f"scheme must be {SCHEME!r}, got {v!r}")
        return v

    @field_validator("nid")
    @classmethod
    def _nid(cls, v: str) -> str:
        return validate_nid(v)

    @field_validator("path")
    @classmethod
    def _path(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        if not v:
            raise MalformedName("agent name path is empty")
        if len(v) > MAX_DEPTH:
            raise MalformedName(f"path depth {len(v)} exceeds {MAX_DEPTH}")
        return tuple(validate_label(x) for x in v)

    def __str__(self) -> str:
        return format_canonical(self)


def parse_ual(text: str) -> AgentName:
    """Parse any accepted surface form into a normalized AgentName."""
    if not isinstance(text, str) or not text.strip():
        raise MalformedName("empty agent name")
    raw = text.strip()
    lowered = raw.lower()
    for prefix in _PREFIXES:
        if lowered.startswith(prefix):
            rest = raw[len(prefix):]
            break
    else:
        raise MalformedName(f"unknown scheme in {text!r}")

    cut = min((i for i in (rest.find(":"), rest.find("/")) if i >= 0), default=-1)
    if cut < 0:
        raise MalformedName(f"agent name {text!r} has no path")
    nid, sep, tail = rest[:cut], rest[cut], rest[cut + 1:]
    other = "/" if sep == ":" else ":"
    if other in tail:
        raise MalformedName(f"mixed separators in {text!r}")
    labels = tail.split(sep) if tail else []
    if not labels:
        raise MalformedName(f"agent name {text!r} has an empty path")
    if any(label == "" for label in labels):
        raise MalformedName(f"agent name {text!r} has an empty label")
    if len(labels) > MAX_DEPTH:
        raise MalformedName(f"path depth {len(labels)} exceeds {MAX_DEPTH}")
    return AgentName(nid=validate_nid(nid), path=tuple(validate_label(x) for x in labels))


def format_canonical(name: AgentName) -> str:
    return ":".join((name.scheme, name.nid, *name.path))


def canonicalize(text: str) -> str:
    """Shorthand for ``format_canonical(parse_ual(text))``."""
    return format_canonical(parse_ual(text))


def derive_root_url(nid: str) -> str:
    """URL of the root name server of a namespace."""
    return f"https://{validate_nid(nid)}"


def zone_of(name: AgentName, depth: int) -> ZonePath:
    if not 0 <= depth <= len(name.path):
        raise OutOfRange(f"depth {depth} outside 0..{len(name.path)}")
    return ZonePath(nid=name.nid, labels=name.path[:depth])


def parse_zone(text: str) -> ZonePath:
    """Parse ``ual:<nid>[:label...]`` (a name with a possibly empty path)."""
    if not isinstance(text, str) or not text:
        raise MalformedName("empty zone")
    lowered = text.lower()
    for prefix in _PREFIXES:
        if lowered.startswith(prefix):
            rest = text[len(prefix):]
            break
    else:
        raise MalformedName(f"unknown scheme in zone {text!r}")
    parts = rest.replace("/", ":").split(":")
    if any(p == "" for p in parts[1:]):
        raise MalformedName(f"zone {text!r} has an empty label")
    if len(parts) - 1 > MAX_DEPTH:
        raise MalformedName(f"zone depth {len(parts) - 1} exceeds {MAX_DEPTH}")
    return ZonePath(nid=validate_nid(parts[0]), labels=tuple(validate_label(x) for x in parts[1:]))
