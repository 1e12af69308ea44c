from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from support import AUTH, MID, NAME, ROOT, AsgiRouter, Namespace, geo_record
from ualresolver.api import create_facts_app, create_nameserver_app, create_resolver_app
from ualresolver.cli import main
from ualresolver.facts import FactsRegistry
from ualresolver.names import parse_zone
from ualresolver.nameserver import NameServer
from ualresolver.resolver import RecursiveResolver
from ualresolver.transport import HttpNetwork

FACTS = "https://facts.example"
RESOLVER = "https://resolver.example"
ROVER = "ual:nanda.mit.edu:lab15:rover"
ROVER_NS = "https://ns.rover.example"
SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def world(tmp_path):
    ns = Namespace(secret="k")
    router = AsgiRouter({s.url: create_nameserver_app(s) for s in (ns.root, ns.mid, ns.auth)})
    router.add(FACTS, create_facts_app(FactsRegistry(clock=ns.clock)))
    router.add(RESOLVER, create_resolver_app(
        RecursiveResolver(HttpNetwork(router), {"nanda.mit.edu": ROOT}, clock=ns.clock)))
    roots = tmp_path / "roots.json"
    roots.write_text(json.dumps({"nanda.mit.edu": ROOT}))
    return router, roots, tmp_path


def run(router, args, **kw):
    return CliRunner().invoke(main, args, obj={"client_factory": router}, **kw)


def test_resolve_local_text_and_json(world):
    router, roots, _ = world
    out = run(router, ["resolve", NAME, "--lat", "50.1", "--lon", "8.7", "--roots", str(roots)])
    assert out.exit_code == 0, out.output
    assert "https://fra.edge.example/a" in out.output
    out = run(router, ["resolve", NAME.upper(), "--lat", "42.3", "--lon", "-71", "--roots", str(roots), "--json"])
    body = json.loads(out.output)
    assert body["endpoint_url"] == "https://bos.edge.example/a" and body["policy_used"] == "geo_nearest"


def test_resolve_roots_from_env(world):
    router, roots, _ = world
    out = run(router, ["resolve", NAME, "--lat", "35", "--lon", "139"], env={"UAL_ROOTS": str(roots)})
    assert out.exit_code == 0 and "tyo.edge.example" in out.output


def test_resolve_through_resolver_service(world):
    router, _, _ = world
    out = run(router, ["resolve", NAME, "--lat", "50", "--lon", "8", "--resolver", RESOLVER, "--json"])
    assert out.exit_code == 0, out.output
    assert json.loads(out.output)["endpoint_url"] == "https://fra.edge.example/a"


def test_resolve_context_file(world):
    router, roots, tmp = world
    ctx = tmp / "ctx.json"
    ctx.write_text(json.dumps({"geo": {"lat": 35.6, "lon": 139.7}}))
    out = run(router, ["resolve", NAME, "--context-file", str(ctx), "--roots", str(roots)])
    assert out.exit_code == 0 and "tyo.edge.example" in out.output


@pytest.mark.parametrize("args", [
    ["resolve", "badname"],
    ["resolve", NAME, "--lat", "91", "--lon", "0"],
    ["resolve", NAME, "--lat", "10"],
    ["resolve", NAME, "--cidr", "10.0.0.0/99"],
])
def test_usage_errors_exit_2(world, args):
    router, roots, _ = world
    out = run(router, [*args, "--roots", str(roots)])
    assert out.exit_code == 2, out.output


def test_domain_error_exits_1(world):
    router, roots, _ = world
    out = run(router, ["resolve", "ual:nanda.mit.edu:lab15:ghost", "--roots", str(roots)])
    assert out.exit_code == 1 and "name_not_found" in out.output


def test_missing_context_without_negotiation_exits_1(world):
    router, roots, _ = world
    out = run(router, ["resolve", NAME, "--no-negotiate", "--roots", str(roots)])
    assert out.exit_code == 1 and "negotiation_declined" in out.output


def test_register_zone_and_agent(world):
    router, roots, tmp = world
    zone = tmp / "zone.json"
    zone.write_text(json.dumps({"zone": parse_zone(ROVER).model_dump(mode="json"), "child_server_url": ROVER_NS,
                                "kind": "authoritative_delegation"}))
    assert run(router, ["register", "zone", str(zone), "--server", MID]).exit_code == 1
    out = run(router, ["register", "zone", str(zone), "--server", MID], env={"UAL_SECRET": "k"})
    assert out.exit_code == 0, out.output

    router.add(ROVER_NS, create_nameserver_app(NameServer(ROVER_NS, [parse_zone(ROVER)], secret="k")))
    agent = tmp / "agent.json"
    agent.write_text(json.dumps(geo_record(ROVER)))
    out = run(router, ["register", "agent", str(agent), "--server", ROVER_NS, "--secret", "k", "--json"])
    assert out.exit_code == 0, out.output
    assert json.loads(out.output)["agent_name"] == ROVER
    out = run(router, ["resolve", ROVER, "--lat", "50", "--lon", "8",
                       "--roots", str(roots)])
    assert out.exit_code == 0 and "fra.edge.example" in out.output


def test_register_bad_file_is_usage_error(world):
    router, _, tmp = world
    bad = tmp / "bad.json"
    bad.write_text(json.dumps({"agent_name": "nope"}))
    assert run(router, ["register", "agent", str(bad), "--server", AUTH, "--secret", "k"]).exit_code == 2
    bad.write_text("{")
    assert run(router, ["register", "agent", str(bad), "--server", AUTH, "--secret", "k"]).exit_code == 2


def test_facts_publish_get_find(world):
    router, _, tmp = world
    card = tmp / "card.json"
    card.write_text(json.dumps({"agent_name": NAME, "capabilities": ["vision", "arm"], "ttl_seconds": 60}))
    assert run(router, ["register", "facts", str(card), "--server", FACTS]).exit_code == 0
    out = run(router, ["facts", "get", NAME, "--server", FACTS, "--json"])
    assert json.loads(out.output)["capabilities"] == ["vision", "arm"]
    out = run(router, ["facts", "find", "--tag", "vision", "--server", FACTS])
    assert out.exit_code == 0 and out.output.strip() == f"{NAME}  vision,arm"
    out = run(router, ["facts", "get", "ual:nanda.mit.edu:x", "--server", FACTS])
    assert out.exit_code == 1 and "not_found" in out.output


def test_unreachable_server_exits_1(world):
    router, _, _ = world
    out = run(router, ["facts", "get", NAME, "--server", "https://down.example"])
    assert out.exit_code == 1


def test_scenario_run_pass_and_fail(tmp_path):
    out = CliRunner().invoke(main, ["scenario", "run", str(SCENARIOS / "edge.json")])
    assert out.exit_code == 0 and "PASS" in out.output
    doc = json.loads((SCENARIOS / "edge.json").read_text())
    doc["assertions"].append({"check": "zero_selections", "url": doc["agents"][0]["record"]["endpoints"][0]["url"]})
    failing = tmp_path / "failing.json"
    failing.write_text(json.dumps(doc))
    out = CliRunner().invoke(main, ["scenario", "run", str(failing), "--json"])
    assert out.exit_code == 1 and json.loads(out.output)["passed"] is False
    failing.write_text("{}")
    assert CliRunner().invoke(main, ["scenario", "run", str(failing)]).exit_code == 1
