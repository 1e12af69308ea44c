"""Data model of the adaptive handshake: specs, resources, placements."""

from __future__ import annotations

from enum import Enum
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..context import Context, ContextRequirements
from ..tailoring import Location

_FROZEN = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

ConstraintKind = Literal[
    "max_latency_ms", "min_throughput_mbps", "max_total_cost", "colocate", "require_capability",
]


class ComponentVar(BaseModel):
    model_config = _FROZEN

    component_id: str
    candidate_resource_ids: tuple[str, ...] = Field(min_length=1)
    # Capacity units the component consumes on its resource.
    units: float = Field(default=1.0, ge=0)


class Constraint(BaseModel):
    """One placement constraint.

    ``args`` by kind: ``{"value": x}`` for the three numeric bounds,
    ``{"components": [...]}`` for colocate and
    ``{"component": c, "capability": tag}`` for require_capability.
    """

    model_config = _FROZEN

    kind: ConstraintKind
    args: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _shape(self) -> Constraint:
        a = self.args
        if self.kind in ("max_latency_ms", "min_throughput_mbps", "max_total_cost"):
            if not isinstance(a.get("value"), (int, float)) or isinstance(a.get("value"), bool):
                raise ValueError(f"{self.kind} needs a numeric 'value'")
        elif self.kind == "colocate":
            comps = a.get("components")
            if not isinstance(comps, list) or len(comps) < 2:
                raise ValueError("colocate needs at least two 'components'")
        elif not isinstance(a.get("component"), str) or not isinstance(a.get("capability"), str):
            raise ValueError("require_capability needs 'component' and 'capability'")
        return self

    def components(self) -> list[str]:
        if self.kind == "colocate":
            return list(self.args["components"])
        if self.kind == "require_capability":
            return [self.args["component"]]
        return []


class ObjectiveWeights(BaseModel):
    model_config = _FROZEN

    latency: float = Field(default=0.7, ge=0)
    cost: float = Field(default=0.3, ge=0)


class Objective(BaseModel):
    model_config = _FROZEN

    weights: ObjectiveWeights = Field(default_factory=ObjectiveWeights)
    sense: Literal["minimize"] = "minimize"


class CommsSpec(BaseModel):
    model_config = _FROZEN

    session_id: str
    participants: tuple[str, ...] = Field(min_length=2)
    variables: tuple[ComponentVar, ...] = Field(min_length=1)
    constraints: tuple[Constraint, ...] = ()
    objective: Objective = Field(default_factory=Objective)
    rounds: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _references(self) -> CommsSpec:
        ids = [v.component_id for v in self.variables]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate component ids")
        for c in self.constraints:
            unknown = set(c.components()) - set(ids)
            if unknown:
                raise ValueError(f"constraint references unknown components {sorted(unknown)}")
        return self


class ResourceKind(str, Enum):
    datacenter = "datacenter"
    edge = "edge"
    device = "device"


class Resource(BaseModel):
    model_config = _FROZEN

    resource_id: str
    owner: str
    geo: Location
    kind: ResourceKind = ResourceKind.datacenter
    capacity_units: float = Field(gt=0)
    cost_per_unit: float = Field(default=0.0, ge=0)
    link_latency_ms: dict[str, float] = Field(default_factory=dict)
    capabilities: tuple[str, ...] = ()
    # None means unconstrained bandwidth.
    throughput_mbps: float | None = Field(default=None, gt=0)
    url: str | None = None

    @model_validator(mode="after")
    def _latencies(self) -> Resource:
        if any(v <= 0 for v in self.link_latency_ms.values()):
            raise ValueError("link latencies must be positive")
        return self

    def base_url(self) -> str:
        return self.url or f"https://{self.resource_id}.resources.invalid"


class PlacementSpec(BaseModel):
    model_config = _FROZEN

    session_id: str
    assignment: dict[str, str]
    expected_cost: float
    expected_latency_ms: float
    objective: float = 0.0
    method: Literal["exhaustive", "greedy"] = "exhaustive"
    endpoints: dict[str, str] = Field(default_factory=dict)


class ComponentDecl(BaseModel):
    """A component of the target's channel as declared in its deployment record.

    Components with ``placed_by="requester"`` take their candidates from the
    requester's ``extra.resources`` context field (comma-separated ids).
    """

    model_config = _FROZEN

    component_id: str
    candidate_resource_ids: tuple[str, ...] = ()
    units: float = Field(default=1.0, ge=0)
    placed_by: Literal["target", "requester"] = "target"

    @model_validator(mode="after")
    def _candidates(self) -> ComponentDecl:
        if self.placed_by == "target" and not self.candidate_resource_ids:
            raise ValueError(f"component {self.component_id!r} has no candidate resources")
        return self


class AdaptiveProfile(BaseModel):
    """Target-side inputs to the handshake, carried in the deployment record."""

    model_config = _FROZEN

    target_context: Context = Field(default_factory=Context)
    components: tuple[ComponentDecl, ...] = Field(min_length=1)
    constraints: tuple[Constraint, ...] = ()
    objective: Objective = Field(default_factory=Objective)
    inactivity_timeout_s: int = Field(default=300, gt=0)


class NegotiationOffer(BaseModel):
    model_config = _FROZEN

    session_id: str
    requester_name: str = "ual:anonymous.invalid:requester"
    supplied: dict[str, Any] = Field(default_factory=dict)
    refused: tuple[str, ...] = ()
    demands: ContextRequirements | None = None


class NegotiationReply(BaseModel):
    model_config = _FROZEN

    session_id: str
    status: Literal["need_more", "agreed", "failed"]
    round: int = 0
    missing: tuple[str, ...] = ()
    disclosed: dict[str, Any] = Field(default_factory=dict)
    comms_spec: CommsSpec | None = None
    reason: str | None = None


class SessionState(str, Enum):
    negotiating = "negotiating"
    optimizing = "optimizing"
    deploying = "deploying"
    active = "active"
    torn_down = "torn_down"


class SessionView(BaseModel):
    """Externally visible snapshot of a channel session."""

    model_config = _FROZEN

    session_id: str
    state: SessionState
    last_activity: float
    inactivity_timeout_s: int
    endpoints: dict[str, str] | None = None
