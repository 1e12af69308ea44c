"""Regenerate the golden wire corpus under testdata/wire/.

One canonical envelope per message kind, plus malformed inputs under
testdata/wire/invalid/ named after the error they must raise.
"""

from __future__ import annotations

from pathlib import Path

from ualresolver import wire
from ualresolver.adaptive import (
    AdaptiveProfile,
    CommsSpec,
    ComponentDecl,
    ComponentVar,
    Constraint,
    NegotiationOffer,
    NegotiationReply,
    PlacementSpec,
    Resource,
    SessionState,
    SessionView,
)
from ualresolver.context import Context, ContextRequirements, Restriction, fingerprint
from ualresolver.facts import AgentFactsCard
from ualresolver.messages import NegotiationInvitation, Referral, ResolverAnswer, ResolverQuery, TailoredResponse
from ualresolver.names import parse_zone
from ualresolver.nameserver import AgentDeploymentRecord, StatusUpdate, ZoneRecord, ZoneRegistration
from ualresolver.tailoring import EndpointCandidate, Policy

OUT = Path(__file__).resolve().parent.parent / "testdata" / "wire"
TS = "2026-01-15T12:00:00.000Z"
NAME = "ual:nanda.mit.edu:lab15:robot42"
SID = "6f1c2d3e-4a5b-4c6d-8e7f-0123456789ab"

ctx = Context(geo={"lat": 42.36, "lon": -71.06, "city": "Boston"}, topology_cidr="10.1.0.0/16",
              qos={"max_latency_ms": 50}, extra={"role": "tuba"})
fp = fingerprint(ctx, ["geo", "topology_cidr"])
demands = ContextRequirements(required_fields=("geo",),
                              restrictions=(Restriction(field="topology_cidr", predicate="within_cidr",
                                                        value="10.0.0.0/8"),))
candidate = EndpointCandidate(url="https://bos.edge.example/robot42", geo={"lat": 42.36, "lon": -71.06},
                              capacity_ops_per_s=100, current_load=12.5, cost_units_per_op=0.01)
resource = Resource(resource_id="dc-bos", owner="bigcloud", geo={"lat": 42.35, "lon": -71.05}, capacity_units=10,
                    cost_per_unit=1, link_latency_ms={"laptop": 40}, capabilities=("gpu",),
                    url="https://dc-bos.bigcloud.example")
spec = CommsSpec(session_id=SID, participants=(NAME, "ual:sim.example:lab:alice"),
                 variables=(ComponentVar(component_id="client", candidate_resource_ids=("laptop", "dc-bos")),
                            ComponentVar(component_id="store", candidate_resource_ids=("dc-bos",), units=4)),
                 constraints=(Constraint(kind="max_latency_ms", args={"value": 50}),
                              Constraint(kind="colocate", args={"components": ["client", "store"]})),
                 rounds=1)
referral = Referral(zone=parse_zone("ual:nanda.mit.edu:lab15"), next_server_url="https://ns.lab15.nanda.mit.edu")
tailored = TailoredResponse(endpoint_url=candidate.url, fingerprint=fp, policy_used=Policy.geo_nearest)
invitation = NegotiationInvitation(session_id=SID, missing_fields=("geo",), target_demands=demands,
                                   negotiation_url=f"https://ns.robot42.lab15.example/sessions/{SID}")
endpoints = {NAME: f"https://dc-bos.bigcloud.example/channels/{SID}",
             "ual:sim.example:lab:alice": f"https://dc-bos.bigcloud.example/channels/{SID}"}
card = AgentFactsCard(agent_name=NAME, label="robot42", capabilities=("telemetry",), context_requirements=demands,
                      ttl_seconds=3600, published_at=1768478400.0)

MESSAGES = {
    "ack": wire.Ack(detail="registered"),
    "agent_deployment_record": AgentDeploymentRecord(
        agent_name=NAME, endpoints=(candidate,), context_fields_needed=("geo",), policy=Policy.geo_nearest,
        adaptive=AdaptiveProfile(components=(ComponentDecl(component_id="store",
                                                           candidate_resource_ids=("dc-bos",)),))),
    "agent_facts_card": card,
    "comms_spec": spec,
    "context": ctx,
    "context_requirements": demands,
    "endpoint_candidate": candidate,
    "endpoints": wire.Endpoints(session_id=SID, endpoints=endpoints),
    "error": wire.ErrorBody(code="name_not_found", message=f"{NAME} does not exist"),
    "facts_list": wire.FactsList(cards=(card,)),
    "negotiation_invitation": invitation,
    "negotiation_offer": NegotiationOffer(session_id=SID, requester_name="ual:sim.example:lab:alice",
                                          supplied={"geo": {"lat": 42.36, "lon": -71.06}}),
    "negotiation_reply": NegotiationReply(session_id=SID, status="agreed", round=1, comms_spec=spec),
    "owner_setup": wire.OwnerSetup(session_id=SID, section={"store": "dc-bos"}),
    "placement_spec": PlacementSpec(session_id=SID, assignment={"client": "dc-bos", "store": "dc-bos"},
                                    expected_cost=5.0, expected_latency_ms=0.0, objective=1.5, endpoints=endpoints),
    "referral": referral,
    "resolver_answer": ResolverAnswer.of(referral),
    "resolver_query": ResolverQuery(query_id="0b7e6a52-9d0c-4c55-a3f3-3d2b8f1e4a10", name=NAME, context=ctx),
    "resource": resource,
    "session_view": SessionView(session_id=SID, state=SessionState.active, last_activity=1768478400.0,
                                inactivity_timeout_s=300, endpoints=endpoints),
    "status_update": StatusUpdate(endpoint_url=candidate.url, load=12.5),
    "tailored_response": tailored,
    "zone_record": ZoneRecord(zone=parse_zone("ual:nanda.mit.edu:lab15"), server_url="https://ns.lab15.nanda.mit.edu"),
    "zone_registration": ZoneRegistration(zone=parse_zone("ual:nanda.mit.edu:lab15"),
                                          child_server_url="https://ns.lab15.nanda.mit.edu"),
}

INVALID = {
    "version_mismatch-future.json": b'{"body":{},"kind":"ack","ts":"2026-01-15T12:00:00.000Z","v":"ual/0.2"}',
    "version_mismatch-legacy.json": b'{"body":{"name":"ual:a.example:x"},"kind":"resolver_query","v":"ual/0"}',
    "decode_error-not-json.json": b'{"v":"ual/0.1","kind":"ack",',
    "decode_error-array.json": b'[1,2,3]',
    "decode_error-missing-ts.json": b'{"body":{},"kind":"ack","v":"ual/0.1"}',
    "decode_error-bad-ts.json": b'{"body":{},"kind":"ack","ts":"yesterday","v":"ual/0.1"}',
    "decode_error-bad-name.json": (b'{"body":{"name":"ual:bad_nid:x"},"kind":"resolver_query",'
                                   b'"ts":"2026-01-15T12:00:00.000Z","v":"ual/0.1"}'),
    "decode_error-extra-field.json": (b'{"body":{"ok":true,"surprise":1},"kind":"ack",'
                                      b'"ts":"2026-01-15T12:00:00.000Z","v":"ual/0.1"}'),
    "decode_error-kind-mismatch.json": (b'{"body":{"kind":"referral","body":{"session_id":"s"}},'
                                        b'"kind":"resolver_answer","ts":"2026-01-15T12:00:00.000Z","v":"ual/0.1"}'),
    "unknown_kind-bogus.json": b'{"body":{},"kind":"bogus","ts":"2026-01-15T12:00:00.000Z","v":"ual/0.1"}',
}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "invalid").mkdir(exist_ok=True)
    missing = set(wire.MESSAGE_TYPES) - set(MESSAGES)
    if missing:
        raise SystemExit(f"no golden message for {sorted(missing)}")
    for kind, message in sorted(MESSAGES.items()):
        (OUT / f"{kind}.json").write_bytes(wire.encode(message, ts=TS))
    for name, data in sorted(INVALID.items()):
        (OUT / "invalid" / name).write_bytes(data)
    print(f"wrote {len(MESSAGES)} golden and {len(INVALID)} invalid files to {OUT}")


if __name__ == "__main__":
    main()
