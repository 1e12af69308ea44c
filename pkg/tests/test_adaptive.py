from __future__ import annotations

import math
import random

import pytest

import oracles
from support import BOSTON, build, random_instance
from ualresolver.adaptive import (
    AdaptiveProfile,
    CommsSpec,
    Constraint,
    NegotiationOffer,
    PlacementSpec,
    Resource,
    SessionManager,
    SessionState,
    TargetNegotiator,
    assemble_comms_spec,
    deploy,
    evaluate,
    optimize_placement,
)
from ualresolver.adaptive.negotiation import MAX_ROUNDS
from ualresolver.adaptive.optimizer import assignment_count
from ualresolver.clock import FakeClock
from ualresolver.context import Context, ContextRequirements
from ualresolver.errors import DeployFailed, Infeasible, MalformedSpec, NegotiationFailed, SessionExpired

@pytest.mark.parametrize("seed", range(60))
def test_exhaustive_matches_enumeration(seed):
    rng = random.Random(seed)
    n_comp, n_cand = rng.randint(1, 4), rng.randint(1, 5)
    spec, resources = random_instance(rng, n_comp, rng.randint(n_cand, 6), n_cand)
    best = oracles.exhaustive_optimum(spec, resources)
    cs, rs = build(spec, resources)
    if math.isinf(best):
        with pytest.raises(Infeasible):
            optimize_placement(cs, rs)
        return
    plan = optimize_placement(cs, rs)
    assert plan.method == "exhaustive"
    assert plan.objective == pytest.approx(best, abs=1e-9)
    ok, obj = oracles.check_assignment(spec, resources, plan.assignment)
    assert ok and obj == pytest.approx(plan.objective)


@pytest.mark.parametrize("seed", range(20))
def test_greedy_is_feasible_on_large_instances(seed):
    rng = random.Random(1000 + seed)
    spec, resources = random_instance(rng, 12, 10, 8, ample=True)
    spec["constraints"] = [c for c in spec["constraints"] if c["kind"] not in ("max_total_cost", "max_latency_ms",
                                                                                 "min_throughput_mbps")]
    cs, rs = build(spec, resources)
    assert assignment_count(cs) > 10**6
    try:
        plan = optimize_placement(cs, rs)
    except Infeasible:
        assert math.isinf(_some_feasible(spec, resources, rng))
        return
    assert plan.method == "greedy"
    ok, _ = oracles.check_assignment(spec, resources, plan.assignment)
    assert ok and evaluate(cs, rs, plan.assignment).feasible


def _some_feasible(spec, resources, rng, tries=20000) -> float:
    comps = [v["component_id"] for v in spec["variables"]]
    for _ in range(tries):
        a = {v["component_id"]: rng.choice(v["candidate_resource_ids"]) for v in spec["variables"]}
        ok, obj = oracles.check_assignment(spec, resources, a)
        if ok:
            return obj
    del comps
    return math.inf


def test_explicit_methods_and_errors():
    rng = random.Random(7)
    spec, resources = random_instance(rng, 3, 4, 3, constraints=False, ample=True)
    cs, rs = build(spec, resources)
    exact = optimize_placement(cs, rs, method="exhaustive")
    greedy = optimize_placement(cs, rs, method="greedy")
    assert greedy.objective >= exact.objective - 1e-9
    with pytest.raises(MalformedSpec):
        optimize_placement(cs, rs[:1])
    with pytest.raises(ValueError):
        CommsSpec(session_id="s", participants=("a", "b"), variables=cs.variables,
                  constraints=(Constraint(kind="colocate", args={"components": ["c0", "zz"]}),))
    with pytest.raises(ValueError):
        Constraint(kind="max_latency_ms", args={"value": "fast"})


def test_colocation_beats_latency():
    dev = Resource(resource_id="dev", owner="me", geo=BOSTON, capacity_units=1, link_latency_ms={"dc": 40})
    dc = Resource(resource_id="dc", owner="cloud", geo=BOSTON, capacity_units=10, cost_per_unit=1)
    spec = CommsSpec(session_id="s", participants=("a", "b"), variables=(
        {"component_id": "client", "candidate_resource_ids": ("dev", "dc")},
        {"component_id": "store", "candidate_resource_ids": ("dc",), "units": 4}))
    plan = optimize_placement(spec, [dev, dc])
    assert plan.assignment == {"client": "dc", "store": "dc"}
    assert plan.expected_latency_ms == 0 and plan.expected_cost == 5
    assert plan.objective == pytest.approx(1.5)


# -- negotiation --------------------------------------------------------------

PROFILE = AdaptiveProfile(target_context=Context(geo=BOSTON, qos={"max_latency_ms": 80}),
                          components=({"component_id": "svc", "candidate_resource_ids": ("dc",)},))


def test_negotiation_agrees_and_merges_bounds():
    demands = ContextRequirements(required_fields=("geo",))
    neg = TargetNegotiator("s", "ual:t.example:x", PROFILE, demands, Context())
    first = neg.step(NegotiationOffer(session_id="s", supplied={}))
    assert first.status == "need_more" and first.missing == ("geo",)
    done = neg.step(NegotiationOffer(session_id="s", requester_name="ual:r.example:y",
                                     supplied={"geo": BOSTON, "qos.max_latency_ms": 30, "cost.max_cost_units": 9}))
    assert done.status == "agreed" and done.round == 1
    kinds = {c.kind: c.args["value"] for c in done.comms_spec.constraints}
    assert kinds == {"max_latency_ms": 30, "max_total_cost": 9}
    assert done.comms_spec.participants == ("ual:t.example:x", "ual:r.example:y")
    assert neg.step(NegotiationOffer(session_id="s")) == done


def test_negotiation_round_cap():
    demands = ContextRequirements(required_fields=("geo",))
    neg = TargetNegotiator("s", "ual:t.example:x", PROFILE, demands, Context())
    statuses = [neg.step(NegotiationOffer(session_id="s", supplied={"extra.n": str(i)})).status
                for i in range(MAX_ROUNDS + 1)]
    assert statuses == ["need_more"] * MAX_ROUNDS + ["failed"]


def test_negotiation_refusal_and_requester_demands():
    demands = ContextRequirements(required_fields=("geo",))
    neg = TargetNegotiator("s", "t", PROFILE, demands, Context())
    assert neg.step(NegotiationOffer(session_id="s", refused=("geo",))).status == "failed"
    neg = TargetNegotiator("s", "t", PROFILE, ContextRequirements(), Context())
    picky = ContextRequirements(restrictions=({"field": "qos.max_latency_ms", "predicate": "max", "value": 10},))
    reply = neg.step(NegotiationOffer(session_id="s", demands=picky))
    assert reply.status == "failed" and "violates" in reply.reason


def test_requester_placed_components_need_resources():
    profile = AdaptiveProfile(components=({"component_id": "c", "placed_by": "requester"},))
    with pytest.raises(NegotiationFailed):
        assemble_comms_spec("s", ["a", "b"], profile, Context(), Context())
    spec = assemble_comms_spec("s", ["a", "b"], profile, Context(extra={"resources": "x, y"}), Context())
    assert spec.variables[0].candidate_resource_ids == ("x", "y")


# -- deployment and sessions --------------------------------------------------

RES = [
    Resource(resource_id="edge", owner="telco", geo=BOSTON, capacity_units=4, link_latency_ms={"dc": 10},
             url="https://edge.example"),
    Resource(resource_id="dc", owner="cloud", geo=BOSTON, capacity_units=4, cost_per_unit=1, url="https://dc.example"),
    Resource(resource_id="dc2", owner="cloud2", geo=BOSTON, capacity_units=4, cost_per_unit=2,
             link_latency_ms={"edge": 15}, url="https://dc2.example"),
]
TWO_PART = AdaptiveProfile(components=({"component_id": "front", "candidate_resource_ids": ("edge",)},
                                       {"component_id": "back", "candidate_resource_ids": ("dc", "dc2")}),
                           inactivity_timeout_s=60)


class Owner:
    def __init__(self, log, ok=True, during=None):
        self.log, self.ok, self.during = log, ok, during

    def setup(self, session_id, section):
        if self.during:
            self.during()
        self.log.append((session_id, dict(section)))
        return self.ok


def _agreed(manager: SessionManager, profile=TWO_PART) -> str:
    session = manager.open("ual:t.example:x", profile, ContextRequirements(), Context())
    reply = manager.negotiate(session.session_id, NegotiationOffer(session_id=session.session_id,
                                                                   requester_name="ual:r.example:y"))
    assert reply.status == "agreed"
    return session.session_id


def test_no_endpoint_before_all_acks():
    clock, log, seen = FakeClock(0), [], []
    manager = SessionManager(clock, RES, {}, id_factory=lambda: "s1")

    def probe():
        # Runs inside the slow owner's setup, after the other owner acked.
        clock.advance(5)
        view = manager.view("s1")
        seen.append((view.state, view.endpoints, len(log)))

    manager.owners.update({"cloud": Owner(log), "telco": Owner(log, during=probe)})
    sid = _agreed(manager)
    manager.optimize(sid)
    endpoints = manager.deploy(sid)
    assert seen == [(SessionState.deploying, None, 1)]
    assert len(log) == 2
    assert endpoints == {"ual:t.example:x": "https://dc.example/channels/s1",
                         "ual:r.example:y": "https://edge.example/channels/s1"}
    assert manager.view(sid).state is SessionState.active


def test_failed_owner_triggers_one_reoptimization():
    log = []
    manager = SessionManager(FakeClock(0), RES, {"telco": Owner(log), "cloud": Owner(log, ok=False),
                                                 "cloud2": Owner(log)}, id_factory=lambda: "s2")
    sid = _agreed(manager)
    assert manager.optimize(sid).assignment["back"] == "dc"
    endpoints = manager.deploy(sid)
    assert endpoints["ual:t.example:x"] == "https://dc2.example/channels/s2"
    assert manager.get(sid).placement.assignment["back"] == "dc2"


def test_deploy_failed_when_retry_fails():
    manager = SessionManager(FakeClock(0), RES, {"telco": Owner([], ok=False), "cloud": Owner([])},
                             id_factory=lambda: "s3")
    sid = _agreed(manager)
    manager.optimize(sid)
    with pytest.raises(DeployFailed):
        manager.deploy(sid)
    assert manager.view(sid).state is SessionState.torn_down


def test_direct_deploy_requires_owner_interfaces():
    plan = PlacementSpec(session_id="s", assignment={"svc": "dc"}, expected_cost=1, expected_latency_ms=0)
    spec = CommsSpec(session_id="s", participants=("a", "b"), variables=({"component_id": "svc",
                                                                          "candidate_resource_ids": ("dc",)},))
    with pytest.raises(Exception) as info:
        deploy(plan, spec, RES, {})
    assert info.value.detail["owner"] == "cloud"


def test_sweeper_tears_down_idle_sessions_exactly_once():
    clock = FakeClock(0)
    ids = iter(["a", "b", "c"])
    manager = SessionManager(clock, RES, {"telco": Owner([]), "cloud": Owner([])}, id_factory=lambda: next(ids))
    a = _agreed(manager)
    manager.optimize(a)
    manager.deploy(a)
    b = _agreed(manager)
    clock.advance(60)
    assert manager.sweep_inactive() == []
    manager.touch(b)
    clock.advance(0.5)
    assert manager.sweep_inactive() == ["a"]
    assert manager.sweep_inactive() == []
    c = _agreed(manager)
    clock.advance(61)
    busy = manager.get(c)
    with busy.lock:
        assert manager.sweep_inactive() == ["b"]
    assert manager.sweep_inactive() == ["c"]
    assert manager.sweep_inactive() == []
    with pytest.raises(SessionExpired):
        manager.negotiate(a, NegotiationOffer(session_id=a))
    assert manager.teardown(a) is False


def test_timeout_enforced_on_use():
    clock = FakeClock(0)
    manager = SessionManager(clock, RES, {}, id_factory=lambda: "t")
    sid = _agreed(manager)
    clock.advance(61)
    with pytest.raises(SessionExpired):
        manager.optimize(sid)
    assert manager.view(sid).state is SessionState.torn_down
