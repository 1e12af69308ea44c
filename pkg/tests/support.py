"""Shared builders for tests: namespaces, records and in-process HTTP wiring."""

from __future__ import annotations

import random

import httpx
from fastapi.testclient import TestClient

from ualresolver.adaptive import CommsSpec, Resource
from ualresolver.clock import FakeClock
from ualresolver.names import parse_zone
from ualresolver.nameserver import NameServer, record_from_json
from ualresolver.resolver import RecursiveResolver
from ualresolver.transport import LocalNetwork

ROOT = "https://root.nanda.mit.edu"
MID = "https://ns.lab15.nanda.mit.edu"
AUTH = "https://ns.robot42.lab15.example"
NAME = "ual:nanda.mit.edu:lab15:robot42"
START = 1_700_000_000.0

BOSTON = {"lat": 42.36, "lon": -71.06}
FRANKFURT = {"lat": 50.11, "lon": 8.68}
TOKYO = {"lat": 35.68, "lon": 139.69}


def endpoint(url: str, geo: dict, **kw) -> dict:
    return {"url": url, "geo": geo, "capacity_ops_per_s": 100, **kw}


def geo_record(name: str = NAME, **kw) -> dict:
    return {
        "agent_name": name,
        "policy": "geo_nearest",
        "context_fields_needed": ["geo"],
        "endpoints": [
            endpoint("https://bos.edge.example/a", BOSTON),
            endpoint("https://fra.edge.example/a", FRANKFURT),
            endpoint("https://tyo.edge.example/a", TOKYO),
        ],
        **kw,
    }


class Namespace:
    """root -> lab15 -> authoritative, wired in-process."""

    def __init__(self, record: dict | None = None, *, clock: FakeClock | None = None, secret: str | None = None,
                 **server_kw) -> None:
        self.clock = clock or FakeClock(START)
        kw = {"clock": self.clock, "secret": secret}
        self.root = NameServer(ROOT, [parse_zone("ual:nanda.mit.edu")], **kw)
        self.mid = NameServer(MID, [parse_zone("ual:nanda.mit.edu:lab15")], **kw)
        self.auth = NameServer(AUTH, [parse_zone(NAME)], **kw, **server_kw)
        self.root.register_zone(parse_zone("ual:nanda.mit.edu:lab15"), MID, secret=secret)
        self.mid.register_zone(parse_zone(NAME), AUTH, kind="authoritative_delegation", secret=secret)
        self.auth.record_agent(record_from_json(record or geo_record()), secret=secret)
        self.network = LocalNetwork([self.root, self.mid, self.auth])

    def resolver(self, **kw) -> RecursiveResolver:
        return RecursiveResolver(self.network, {"nanda.mit.edu": ROOT}, clock=self.clock, **kw)


class AsgiRouter:
    """httpx client factory that routes each base URL into an ASGI app."""

    def __init__(self, apps: dict) -> None:
        self.apps = dict(apps)

    def add(self, base_url: str, app) -> None:
        self.apps[base_url.rstrip("/")] = app

    def __call__(self, base_url: str) -> TestClient:
        app = self.apps.get(base_url.rstrip("/"))
        if app is None:
            raise httpx.ConnectError(f"no route to {base_url}")
        return TestClient(app, base_url=base_url)


def random_instance(rng: random.Random, n_comp: int, n_res: int, n_cand: int, *, link_p: float = 0.8,
                    constraints: bool = True, ample: bool = False) -> tuple[dict, dict]:
    ids = [f"r{i}" for i in range(n_res)]
    resources = {}
    for i, rid in enumerate(ids):
        links = {other: rng.randint(1, 60) for other in ids[i + 1:] if ample or rng.random() < link_p}
        resources[rid] = {
            "resource_id": rid, "owner": f"o{i % 3}", "geo": {"lat": 0, "lon": 0},
            "capacity_units": rng.choice([50.0]) if ample else rng.choice([1.0, 2.0, 3.0, 10.0]),
            "cost_per_unit": rng.choice([0.0, 0.5, 1.0, 2.0, 5.0]),
            "link_latency_ms": links,
            "capabilities": ["gpu"] if rng.random() < 0.5 else [],
            "throughput_mbps": rng.choice([None, 10.0, 100.0, 1000.0]),
        }
    variables = []
    for c in range(n_comp):
        variables.append({"component_id": f"c{c}", "candidate_resource_ids": rng.sample(ids, n_cand),
                          "units": rng.choice([0.5, 1.0, 2.0])})
    cons = []
    if constraints:
        comps = [v["component_id"] for v in variables]
        if rng.random() < 0.4:
            cons.append({"kind": "max_latency_ms", "args": {"value": rng.randint(20, 150)}})
        if rng.random() < 0.4:
            cons.append({"kind": "max_total_cost", "args": {"value": rng.choice([2, 5, 10, 30])}})
        if rng.random() < 0.3:
            cons.append({"kind": "min_throughput_mbps", "args": {"value": rng.choice([50, 500])}})
        if rng.random() < 0.3 and len(comps) >= 2:
            cons.append({"kind": "colocate", "args": {"components": rng.sample(comps, 2)}})
        if rng.random() < 0.3:
            cons.append({"kind": "require_capability", "args": {"component": rng.choice(comps), "capability": "gpu"}})
    weights = {"latency": rng.choice([0.7, 1.0, 0.2]), "cost": rng.choice([0.3, 0.0, 1.0])}
    spec = {"session_id": "s", "participants": ["ual:t.example:a", "ual:r.example:b"], "variables": variables,
            "constraints": cons, "objective": {"weights": weights}}
    return spec, resources


def build(spec: dict, resources: dict) -> tuple[CommsSpec, list[Resource]]:
    return CommsSpec.model_validate(spec), [Resource.model_validate(r) for r in resources.values()]
