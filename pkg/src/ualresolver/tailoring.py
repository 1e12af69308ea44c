"""Endpoint-selection policies used by an authoritative server.

Every policy is an argmin over a per-candidate score. Equal scores are broken
round-robin through a :class:`Rotation` counter so repeated selections spread
over tied endpoints deterministically.
"""

from __future__ import annotations

import itertools
import threading
from enum import Enum
from typing import Callable, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .context import Context, haversine_km
from .errors import MissingContext, NoCandidates


class Policy(str, Enum):
    static = "static"
    geo_nearest = "geo_nearest"
    least_load = "least_load"
    weighted = "weighted"


class Location(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)


class EndpointCandidate(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    url: str
    geo: Location
    capacity_ops_per_s: float = Field(gt=0)
    current_load: float = Field(default=0.0, ge=0)
    cost_units_per_op: float = Field(default=0.0, ge=0)
    healthy: bool = True
    # Only consulted by records that route by role (multi-party channels).
    role: str | None = None


class Weights(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    w_dist: float = Field(default=0.5, ge=0)
    w_load: float = Field(default=0.3, ge=0)
    w_cost: float = Field(default=0.2, ge=0)

    @model_validator(mode="after")
    def _positive_total(self) -> Weights:
        if self.w_dist + self.w_load + self.w_cost <= 0:
            raise ValueError("weights must not all be zero")
        return self


class PolicyInput(BaseModel):
    model_config = ConfigDict(frozen=True)

    candidates: tuple[EndpointCandidate, ...]
    requester_ctx: Context = Field(default_factory=Context)
    weights: Weights | None = None


class Rotation:
    """Thread-safe monotonically increasing tie-break counter."""

    def __init__(self, start: int = 0) -> None:
        self._counter = itertools.count(start)
        self._lock = threading.Lock()

    def next(self) -> int:
        with self._lock:
            return next(self._counter)


def _pick(candidates: Sequence[EndpointCandidate], scores: Sequence[float],
          rotation: Rotation | None) -> EndpointCandidate:
    best = min(scores)
    tied = [c for c, s in zip(candidates, scores) if s == best]
    if len(tied) == 1 or rotation is None:
        return tied[0]
    return tied[rotation.next() % len(tied)]


def _require(inp: PolicyInput) -> tuple[EndpointCandidate, ...]:
    if not inp.candidates:
        raise NoCandidates("no eligible endpoints")
    return inp.candidates


def _distances(inp: PolicyInput) -> list[float]:
    if inp.requester_ctx.geo is None:
        raise MissingContext("geo")
    here = inp.requester_ctx.geo
    return [haversine_km(here, c.geo) for c in inp.candidates]


def select_static(inp: PolicyInput, rotation: Rotation | None = None) -> EndpointCandidate:
    return _require(inp)[0]


def select_geo_nearest(inp: PolicyInput, rotation: Rotation | None = None) -> EndpointCandidate:
    candidates = _require(inp)
    return _pick(candidates, _distances(inp), rotation)


def select_least_load(inp: PolicyInput, rotation: Rotation | None = None) -> EndpointCandidate:
    candidates = _require(inp)
    return _pick(candidates, [c.current_load for c in candidates], rotation)


def weighted_scores(inp: PolicyInput) -> list[float]:
    """Per-candidate ``w_dist*dist/max_dist + w_load*load + w_cost*cost/max_cost``."""
    w = inp.weights or Weights()
    candidates = inp.candidates
    if w.w_dist > 0:
        dists = _distances(inp)
        max_dist = max(dists)
    else:
        dists, max_dist = [0.0] * len(candidates), 0.0
    costs = [c.cost_units_per_op for c in candidates]
    max_cost = max(costs)
    scores = []
    for c, d, cost in zip(candidates, dists, costs):
        s = w.w_load * c.current_load
        if max_dist > 0:
            s += w.w_dist * (d / max_dist)
        if max_cost > 0:
            s += w.w_cost * (cost / max_cost)
        scores.append(s)
    return scores


def select_weighted(inp: PolicyInput, rotation: Rotation | None = None) -> EndpointCandidate:
    candidates = _require(inp)
    return _pick(candidates, weighted_scores(inp), rotation)


SELECTORS: dict[Policy, Callable[[PolicyInput, Rotation | None], EndpointCandidate]] = {
    Policy.static: select_static,
    Policy.geo_nearest: select_geo_nearest,
    Policy.least_load: select_least_load,
    Policy.weighted: select_weighted,
}


def policy_fields(policy: Policy, weights: Weights | None = None) -> set[str]:
    """Context field paths a policy reads."""
    if policy is Policy.geo_nearest:
        return {"geo"}
    if policy is Policy.weighted and (weights or Weights()).w_dist > 0:
        return {"geo"}
    return set()


def select(policy: Policy, inp: PolicyInput, rotation: Rotation | None = None) -> EndpointCandidate:
    return SELECTORS[Policy(policy)](inp, rotation)
