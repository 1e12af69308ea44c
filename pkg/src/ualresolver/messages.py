"""Resolver protocol messages exchanged between resolvers and name servers."""

from __future__ import annotations

import uuid
from typing import Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .context import Context, ContextFingerprint, ContextRequirements
from .names import ZonePath, canonicalize
from .tailoring import Policy

_FROZEN = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)


class ResolverQuery(BaseModel):
    model_config = _FROZEN

    query_id: str = Field(default_factory=lambda: str(uuid.uuid4()))
    name: str
    context: Context = Field(default_factory=Context)
    accept_negotiation: bool = True

    @field_validator("name")
    @classmethod
    def _name(cls, v: str) -> str:
        return canonicalize(v)


class Referral(BaseModel):
    model_config = _FROZEN

    zone: ZonePath
    next_server_url: str
    ttl_seconds: int = Field(default=300, gt=0)


class TailoredResponse(BaseModel):
    model_config = _FROZEN

    endpoint_url: str
    ttl_seconds: int = Field(default=30, ge=0)
    fingerprint: ContextFingerprint
    # "negotiated" marks endpoints issued by the adaptive handshake.
    policy_used: Union[Policy, Literal["negotiated"]]
    session_id: str | None = None


class NegotiationInvitation(BaseModel):
    model_config = _FROZEN

    session_id: str
    missing_fields: tuple[str, ...] = ()
    target_demands: ContextRequirements = Field(default_factory=ContextRequirements)
    # None when the target has no adaptive profile: the requester may only
    # re-query with the missing fields filled in.
    negotiation_url: str | None = None


AnswerKind = Literal["referral", "tailored", "negotiation_invitation"]
_BODY_TYPES: dict[str, type[BaseModel]] = {
    "referral": Referral,
    "tailored": TailoredResponse,
    "negotiation_invitation": NegotiationInvitation,
}


class ResolverAnswer(BaseModel):
    model_config = _FROZEN

    kind: AnswerKind
    body: Union[Referral, TailoredResponse, NegotiationInvitation]

    @model_validator(mode="before")
    @classmethod
    def _body_by_kind(cls, data: Any) -> Any:
        if isinstance(data, dict) and isinstance(data.get("body"), dict):
            body_type = _BODY_TYPES.get(data.get("kind"))
            if body_type is not None:
                data = {**data, "body": body_type.model_validate(data["body"])}
        return data

    @model_validator(mode="after")
    def _kind_matches(self) -> ResolverAnswer:
        if not isinstance(self.body, _BODY_TYPES[self.kind]):
            raise ValueError(f"answer kind {self.kind!r} does not match body {type(self.body).__name__}")
        return self

    @classmethod
    def of(cls, body: Referral | TailoredResponse | NegotiationInvitation) -> ResolverAnswer:
        kind = next(k for k, t in _BODY_TYPES.items() if isinstance(body, t))
        return cls(kind=kind, body=body)
