from __future__ import annotations

import pytest

from support import AUTH, BOSTON, FRANKFURT, MID, NAME, ROOT, START, TOKYO, Namespace, endpoint
from ualresolver.adaptive import Resource
from ualresolver.clock import FakeClock
from ualresolver.context import Context, ContextRequirements
from ualresolver.errors import (
    DepthExceeded,
    MalformedName,
    NameNotFound,
    NegotiationDeclined,
    NegotiationFailed,
    ResolutionLoop,
    Unreachable,
)
from ualresolver.names import parse_zone
from ualresolver.nameserver import NameServer
from ualresolver.resolver import RecursiveResolver
from ualresolver.transport import LocalNetwork


def test_cold_then_warm():
    ns = Namespace()
    r = ns.resolver()
    cold = r.resolve_detailed(NAME, Context(geo=BOSTON))
    assert cold.upstream_queries == 3 and cold.servers == [ROOT, MID, AUTH]
    assert cold.response.endpoint_url == "https://bos.edge.example/a"
    same = r.resolve_detailed(NAME, Context(geo=BOSTON))
    assert same.upstream_queries == 0 and same.from_cache
    other = r.resolve_detailed(NAME, Context(geo=TOKYO))
    assert other.upstream_queries == 1 and other.servers == [AUTH]
    assert other.response.endpoint_url == "https://tyo.edge.example/a"


def test_uncovered_fields_share_cache_entry():
    ns = Namespace()
    r = ns.resolver()
    r.resolve(NAME, Context(geo=BOSTON, topology_cidr="10.0.0.0/8"))
    hit = r.resolve_detailed(NAME, Context(geo=BOSTON, topology_cidr="192.168.0.0/16", extra={"x": "y"}))
    assert hit.from_cache


def test_ttls_expire_in_order():
    ns = Namespace()
    r = ns.resolver()
    r.resolve(NAME, Context(geo=BOSTON))
    ns.clock.advance(30)
    assert r.resolve_detailed(NAME, Context(geo=BOSTON)).upstream_queries == 1
    ns.clock.advance(300)
    assert r.resolve_detailed(NAME, Context(geo=BOSTON)).upstream_queries == 3


def test_cache_capacity_bounds_entries():
    ns = Namespace()
    r = ns.resolver(cache_size=4)
    for lat in range(10):
        r.resolve(NAME, Context(geo={"lat": lat, "lon": 0}))
    assert len(r.cache) <= 4


def test_negative_answers_cached():
    ns = Namespace()
    r = ns.resolver()
    missing = "ual:nanda.mit.edu:lab15:ghost"
    with pytest.raises(NameNotFound):
        r.resolve(missing)
    before = sum(ns.network.queries.values())
    with pytest.raises(NameNotFound):
        r.resolve(missing)
    assert sum(ns.network.queries.values()) == before
    ns.clock.advance(30)
    with pytest.raises(NameNotFound):
        r.resolve(missing)
    assert sum(ns.network.queries.values()) > before


def _cycle():
    clock = FakeClock(START)
    a = NameServer("https://a.example", [parse_zone("ual:loop.example")], clock=clock)
    b = NameServer("https://b.example", [parse_zone("ual:loop.example:x")], clock=clock)
    a.register_zone(parse_zone("ual:loop.example:x"), "https://b.example")
    b.register_zone(parse_zone("ual:loop.example:x:y"), "https://a.example")
    return clock, LocalNetwork([a, b])


def test_cycle_raises_resolution_loop():
    clock, net = _cycle()
    r = RecursiveResolver(net, {"loop.example": "https://a.example"}, clock=clock)
    with pytest.raises(ResolutionLoop):
        r.resolve("ual:loop.example:x:y:z")
    # A warm cache restarts deeper in the chain; the loop is still caught.
    with pytest.raises(ResolutionLoop):
        r.resolve("ual:loop.example:x:y:z")


def test_depth_limit():
    clock, net = _cycle()
    r = RecursiveResolver(net, {"loop.example": "https://a.example"}, clock=clock, max_depth=1)
    with pytest.raises(DepthExceeded):
        r.resolve("ual:loop.example:x:y:z")


def test_unreachable_and_bad_names():
    ns = Namespace()
    ns.network.down.add(MID)
    with pytest.raises(Unreachable):
        ns.resolver().resolve(NAME, Context(geo=BOSTON))
    with pytest.raises(MalformedName):
        ns.resolver().resolve("badname")
    # Without a roots override the root URL comes from the namespace id.
    with pytest.raises(Unreachable):
        RecursiveResolver(ns.network).resolve(NAME)


def test_missing_context_requery_from_private():
    ns = Namespace()
    r = ns.resolver()
    res = r.resolve_detailed(NAME, Context(), private_context=Context(geo=FRANKFURT))
    assert res.response.endpoint_url == "https://fra.edge.example/a"
    with pytest.raises(NegotiationFailed):
        r.resolve(NAME, Context())
    with pytest.raises(NegotiationFailed):
        r.resolve(NAME, Context(), private_context=Context(geo=FRANKFURT), withheld=["geo"])
    with pytest.raises(NegotiationDeclined) as info:
        r.resolve(NAME, Context(), accept_negotiation=False)
    assert info.value.detail["missing"] == ["geo"]


def _adaptive_namespace(**profile):
    record = {
        "agent_name": NAME, "policy": "static", "negotiation_required": True,
        "requirements": {"required_fields": ["extra.resources"]},
        "endpoints": [endpoint("https://store.example/a", BOSTON)],
        "adaptive": {"components": [{"component_id": "client", "placed_by": "requester"},
                                    {"component_id": "store", "candidate_resource_ids": ["dc"]}],
                     "target_context": {"geo": BOSTON}, **profile},
    }
    resources = [
        Resource(resource_id="dev", owner="me", geo=BOSTON, capacity_units=1, link_latency_ms={"dc": 30},
                 url="https://dev.example"),
        Resource(resource_id="dc", owner="cloud", geo=BOSTON, capacity_units=5, cost_per_unit=1,
                 url="https://dc.example"),
    ]

    class Ack:
        def setup(self, session_id, section):
            return True

    ns = Namespace(record, resources=resources, owners={"me": Ack(), "cloud": Ack()},
                   id_factory=lambda: "sess-1")
    return ns


def test_full_handshake():
    ns = _adaptive_namespace()
    r = ns.resolver(requester_name="ual:nanda.mit.edu:lab15:alice")
    res = r.resolve_detailed(NAME, Context(), private_context=Context(extra={"resources": "dev,dc"}))
    resp = res.response
    assert resp.policy_used == "negotiated" and resp.session_id == "sess-1"
    assert resp.endpoint_url == "https://dc.example/channels/sess-1"
    assert resp.ttl_seconds == 0
    placement = ns.auth.sessions.get("sess-1").placement
    assert placement.assignment == {"client": "dc", "store": "dc"}


def test_handshake_requester_demands():
    ns = _adaptive_namespace()
    demands = ContextRequirements(required_fields=("geo",))
    ok = ns.resolver().resolve(NAME, Context(), demands, private_context=Context(extra={"resources": "dev,dc"}))
    assert ok.policy_used == "negotiated"
    picky = ContextRequirements(required_fields=("topology_cidr",))
    with pytest.raises(NegotiationFailed):
        ns.resolver().resolve(NAME, Context(), picky, private_context=Context(extra={"resources": "dev,dc"}))


def test_handshake_refusal_and_decline():
    ns = _adaptive_namespace()
    with pytest.raises(NegotiationFailed):
        ns.resolver().resolve(NAME, Context())
    with pytest.raises(NegotiationDeclined):
        ns.resolver().resolve(NAME, Context(), accept_negotiation=False)
