"""Bounded alternating-offers negotiation of a Comms Spec.

The target's broker (the authoritative server) holds a :class:`TargetNegotiator`
per session. The requester's broker drives it with :func:`negotiate`, sending
one :class:`NegotiationOffer` per round: the context fields the target asked
for, fields it refuses to disclose, and any demands of its own on the
target's context. A round is counted for each offer that supplies or refuses
fields. After ``MAX_ROUNDS`` rounds the negotiation fails.
"""

from __future__ import annotations

from typing import Any, Callable, Iterable

from ..context import (
    ABSENT,
    Context,
    ContextRequirements,
    check_satisfaction,
    get_field,
    set_fields,
)
from ..errors import NegotiationFailed
from ..messages import NegotiationInvitation
from .models import (
    AdaptiveProfile,
    CommsSpec,
    ComponentVar,
    Constraint,
    NegotiationOffer,
    NegotiationReply,
)

MAX_ROUNDS = 8


def _bound(values: list[float], pick: Callable[[Iterable[float]], float]) -> float | None:
    return pick(values) if values else None


def assemble_comms_spec(session_id: str, participants: list[str], profile: AdaptiveProfile,
                        requester_ctx: Context, target_ctx: Context, rounds: int = 0) -> CommsSpec:
    """Merge both parties' QoS and cost fields into a Comms Spec.

    The tighter bound wins when both parties state one.
    """
    variables = []
    for comp in profile.components:
        cands = comp.candidate_resource_ids
        if comp.placed_by == "requester":
            listed = requester_ctx.extra.get("resources", "")
            cands = tuple(r.strip() for r in listed.split(",") if r.strip())
            if not cands:
                raise NegotiationFailed(f"requester offered no resources for {comp.component_id!r}")
        variables.append(ComponentVar(component_id=comp.component_id, candidate_resource_ids=cands,
                                      units=comp.units))

    def values(path: str) -> list[float]:
        got = [get_field(ctx, path) for ctx in (requester_ctx, target_ctx)]
        return [v for v in got if v is not ABSENT]

    constraints = list(profile.constraints)
    latency = _bound(values("qos.max_latency_ms"), min)
    if latency is not None:
        constraints.append(Constraint(kind="max_latency_ms", args={"value": latency}))
    throughput = _bound(values("qos.min_throughput_mbps"), max)
    if throughput is not None:
        constraints.append(Constraint(kind="min_throughput_mbps", args={"value": throughput}))
    cost = _bound(values("cost.max_cost_units"), min)
    if cost is not None:
        constraints.append(Constraint(kind="max_total_cost", args={"value": cost}))
    return CommsSpec(session_id=session_id, participants=tuple(participants), variables=tuple(variables),
                     constraints=tuple(constraints), objective=profile.objective, rounds=rounds)


class TargetNegotiator:
    """Target-side state of one negotiation."""

    def __init__(self, session_id: str, target_name: str, profile: AdaptiveProfile,
                 demands: ContextRequirements, shared: Context) -> None:
        self.session_id = session_id
        self.target_name = target_name
        self.profile = profile
        self.demands = demands
        self.shared = shared
        self.requester_demands = ContextRequirements()
        self.rounds = 0
        self.done: NegotiationReply | None = None

    def _reply(self, status: str, **kw: Any) -> NegotiationReply:
        reply = NegotiationReply(session_id=self.session_id, status=status, round=self.rounds, **kw)
        if status != "need_more":
            self.done = reply
        return reply

    def step(self, offer: NegotiationOffer) -> NegotiationReply:
        if self.done is not None:
            return self.done
        if offer.supplied or offer.refused:
            self.rounds += 1
        if self.rounds > MAX_ROUNDS:
            return self._reply("failed", reason=f"no agreement after {MAX_ROUNDS} rounds")

        outstanding = set(check_satisfaction(self.demands, self.shared).missing)
        refused = sorted(set(offer.refused) & (outstanding | self.demands.read_fields()))
        if refused:
            return self._reply("failed", reason=f"requester refused {refused}")
        if offer.supplied:
            try:
                self.shared = set_fields(self.shared, offer.supplied)
            except Exception as exc:
                return self._reply("failed", reason=f"bad supplied context: {exc}")
        if offer.demands is not None:
            self.requester_demands = self.requester_demands.merged(offer.demands)

        target_ctx = self.profile.target_context
        mine = check_satisfaction(self.requester_demands, target_ctx)
        if mine.missing:
            return self._reply("failed", reason=f"target cannot supply {mine.missing}")
        if mine.violated:
            return self._reply("failed", reason=f"target context violates requester restrictions {mine.violated}")
        theirs = check_satisfaction(self.demands, self.shared)
        if theirs.violated:
            return self._reply("failed", reason=f"requester context violates restrictions {theirs.violated}")

        disclosed = {f: get_field(target_ctx, f) for f in sorted(self.requester_demands.read_fields())}
        if theirs.missing:
            return self._reply("need_more", missing=tuple(theirs.missing), disclosed=disclosed)
        try:
            spec = assemble_comms_spec(self.session_id, [self.target_name, offer.requester_name],
                                       self.profile, self.shared, target_ctx, self.rounds)
        except NegotiationFailed as exc:
            return self._reply("failed", reason=exc.message)
        except ValueError as exc:
            return self._reply("failed", reason=f"cannot assemble comms spec: {exc}")
        return self._reply("agreed", disclosed=disclosed, comms_spec=spec)


Channel = Callable[[NegotiationOffer], NegotiationReply]


def negotiate(invitation: NegotiationInvitation, requester_ctx: Context,
              requester_demands: ContextRequirements | None, channel: Channel, *,
              withheld: Iterable[str] = (), requester_name: str = "ual:anonymous.invalid:requester") -> CommsSpec:
    """Drive a negotiation from the requester's side until agreement or failure.

    ``requester_ctx`` is everything the requester is willing to disclose on
    demand, minus ``withheld`` field paths.
    """
    withheld = set(withheld)
    demands = requester_demands or ContextRequirements()

    def offer_for(fields: Iterable[str], first: bool) -> NegotiationOffer:
        supplied, refused = {}, []
        for f in fields:
            value = get_field(requester_ctx, f)
            if value is ABSENT or f in withheld:
                refused.append(f)
            else:
                supplied[f] = value
        return NegotiationOffer(session_id=invitation.session_id, requester_name=requester_name,
                                supplied=supplied if not refused else {}, refused=tuple(refused),
                                demands=demands if first else None)

    offer = offer_for(invitation.missing_fields, first=True)
    for _ in range(MAX_ROUNDS + 2):
        reply = channel(offer)
        if reply.status == "failed":
            raise NegotiationFailed(reply.reason or "negotiation failed", session_id=invitation.session_id)
        if reply.status == "agreed":
            check = check_satisfaction(demands, _context_from(reply.disclosed))
            if not check.satisfied:
                raise NegotiationFailed("target disclosure does not meet requester demands")
            return reply.comms_spec
        offer = offer_for(reply.missing, first=False)
    raise NegotiationFailed(f"no agreement after {MAX_ROUNDS} rounds")


def _context_from(disclosed: dict[str, Any]) -> Context:
    present = {k: v for k, v in disclosed.items() if v is not ABSENT and v is not None}
    return set_fields(Context(), present)
