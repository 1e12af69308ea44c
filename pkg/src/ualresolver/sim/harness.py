"""Run scenarios in-process against a fake clock and report the results."""

from __future__ import annotations

import math
import random
import uuid
from collections import Counter
from typing import Any

from pydantic import BaseModel, Field

from ..clock import FakeClock
from ..context import Context, to_json_bytes
from ..errors import AssertionFailed, ScenarioInvalid, UalError
from ..facts import FactsRegistry
from ..names import canonicalize, parse_zone
from ..nameserver import AgentDeploymentRecord, NameServer
from ..resolver import RecursiveResolver
from ..tailoring import EndpointCandidate
from ..transport import LocalNetwork
from .scenario import (
    AdvanceOp,
    ConnectOp,
    RecordOp,
    RelocateOp,
    ResolveOp,
    Scenario,
    StatusOp,
    SweepOp,
    load_scenario,
)


class CallResult(BaseModel):
    call: str
    seq: int
    name: str
    at: float
    kind: str
    endpoint: str | None = None
    policy: str | None = None
    queries: int = 0
    from_cache: bool = False
    session_id: str | None = None
    error: str | None = None


class Connection(BaseModel):
    id: str
    agent: str
    url: str
    accepted: bool
    via_relay: str | None = None


class AssertionResult(BaseModel):
    check: str
    passed: bool
    detail: str


class ScenarioReport(BaseModel):
    scenario: str
    seed: int
    passed: bool = True
    calls: list[CallResult] = Field(default_factory=list)
    server_queries: dict[str, int] = Field(default_factory=dict)
    histogram: dict[str, int] = Field(default_factory=dict)
    connections: list[Connection] = Field(default_factory=list)
    owner_setups: list[dict[str, Any]] = Field(default_factory=list)
    sweeps: dict[str, list[str]] = Field(default_factory=dict)
    assertions: list[AssertionResult] = Field(default_factory=list)

    def to_json(self) -> bytes:
        return to_json_bytes(self.model_dump(mode="json"))

    def to_text(self) -> str:
        lines = [f"scenario {self.scenario} (seed {self.seed}): {'PASS' if self.passed else 'FAIL'}", "calls:"]
        for c in self.calls:
            target = c.endpoint or c.error or ""
            lines.append(f"  {c.call}#{c.seq:<3} {c.kind:<10} q={c.queries} {target}")
        if self.histogram:
            lines.append("endpoint load:")
            lines += [f"  {n:>5}  {url}" for url, n in sorted(self.histogram.items())]
        if self.connections:
            lines.append("connections:")
            for c in self.connections:
                state = "ok" if c.accepted else "refused"
                lines.append(f"  {c.agent} -> {c.url} {state}")
        lines.append("assertions:")
        for a in self.assertions:
            lines.append(f"  [{'PASS' if a.passed else 'FAIL'}] {a.check}: {a.detail}")
        return "\n".join(lines) + "\n"


class OwnerStub:
    """Resource owner that acks (or refuses) setups, optionally taking time."""

    def __init__(self, name: str, clock: FakeClock, log: list[dict[str, Any]], *, fail: bool = False,
                 delay_s: float = 0.0) -> None:
        self.name, self.clock, self.log = name, clock, log
        self.fail, self.delay_s = fail, delay_s

    def setup(self, session_id: str, section: dict[str, str]) -> bool:
        if self.delay_s:
            self.clock.advance(self.delay_s)
        self.log.append({"owner": self.name, "session_id": session_id, "section": dict(section),
                         "at": self.clock(), "ok": not self.fail})
        return not self.fail


class RelayStub:
    """Rendezvous point both parties dial out to; it accepts every connection."""

    def __init__(self, url: str, screen: bool = False) -> None:
        self.url = url.rstrip("/")
        self.screen = screen
        self.members: list[str] = []
        self.screened = 0

    def serves(self, url: str) -> bool:
        return url == self.url or url.startswith(self.url + "/")

    def connect(self, agent: str) -> None:
        if self.screen:
            self.screened += 1
        if agent not in self.members:
            self.members.append(agent)


def seeded_ids(seed: int):
    rng = random.Random(seed)
    return lambda: str(uuid.UUID(int=rng.getrandbits(128), version=4))


def _great_circle_km(a: dict, b: dict) -> float:
    # Independent of the tailoring code: vector form on a 6371 km sphere.
    def vec(p: dict) -> tuple[float, float, float]:
        la, lo = math.radians(p["lat"]), math.radians(p["lon"])
        return math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la)

    u, v = vec(a), vec(b)
    cross = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
    dot = sum(x * y for x, y in zip(u, v))
    return 6371.0 * math.atan2(math.sqrt(sum(c * c for c in cross)), dot)


class _Run:
    def __init__(self, s: Scenario) -> None:
        self.s = s
        self.clock = FakeClock(s.start_time)
        self.report = ScenarioReport(scenario=s.name, seed=s.seed)
        ids = seeded_ids(s.seed)
        owners = {o.name: OwnerStub(o.name, self.clock, self.report.owner_setups, fail=o.fail, delay_s=o.delay_s)
                  for o in s.owners}
        self.network = LocalNetwork()
        self.servers: dict[str, NameServer] = {}
        try:
            for spec in s.servers:
                self.servers[spec.url] = self.network.add(NameServer(
                    spec.url, spec.zone_paths(), clock=self.clock, resources=spec.resources, owners=owners,
                    id_factory=ids, referral_ttl=spec.referral_ttl))
            for d in s.delegations:
                self.servers[d.parent].register_zone(parse_zone(d.zone), d.child, d.ttl_seconds, d.kind)
            self.facts = FactsRegistry(self.clock)
            self.agent_server: dict[str, str] = {}
            self.inbound: dict[str, bool] = {}
            for a in s.agents:
                self.servers[a.server].record_agent(a.record)
                self.agent_server[a.record.agent_name] = a.server
                self.inbound[a.record.agent_name] = a.inbound
                if a.facts is not None:
                    self.facts.publish_facts(a.facts)
        except (UalError, ValueError) as exc:
            raise ScenarioInvalid(f"scenario {s.name} does not boot: {getattr(exc, 'message', exc)}") from None
        self.roots = {}
        for url, server in self.servers.items():
            for z in server.zones:
                if z.depth == 0:
                    self.roots[z.nid] = url
        self.resolvers: dict[str, RecursiveResolver] = {}
        self.relays = {r.url.rstrip("/"): RelayStub(r.url, r.screen) for r in s.relays}
        # Per call id: (requester context, candidates at call time) for oracle checks.
        self.snapshots: dict[str, list[tuple[Context, tuple[EndpointCandidate, ...], str | None]]] = {}

    def resolver(self, name: str) -> RecursiveResolver:
        if name not in self.resolvers:
            self.resolvers[name] = RecursiveResolver(self.network, self.roots, clock=self.clock)
        return self.resolvers[name]

    def record_of(self, agent: str) -> AgentDeploymentRecord | None:
        url = self.agent_server.get(canonicalize(agent))
        return self.servers[url].get_record(agent) if url else None

    # -- workload ---------------------------------------------------------

    def run(self) -> ScenarioReport:
        for op in self.s.workload:
            getattr(self, "_op_" + op.op)(op)
        self.report.server_queries = {k: self.network.queries[k] for k in sorted(self.network.queries)}
        hist = Counter(c.endpoint for c in self.report.calls if c.endpoint and c.kind == "tailored")
        self.report.histogram = dict(sorted(hist.items()))
        self.report.connections.sort(key=lambda c: c.id)
        for a in self.s.assertions:
            passed, detail = getattr(self, "_check_" + a.check)(a)
            self.report.assertions.append(AssertionResult(check=a.check, passed=passed, detail=detail))
        self.report.passed = all(a.passed for a in self.report.assertions)
        return self.report

    def _op_resolve(self, op: ResolveOp) -> None:
        resolver = self.resolver(op.resolver)
        key = canonicalize(op.name)
        for seq in range(op.repeat):
            record = self.record_of(key)
            if record is not None:
                self.snapshots.setdefault(op.id, []).append((op.context, record.endpoints, record.role_field))
            result = CallResult(call=op.id, seq=seq, name=key, at=self.clock(), kind="error")
            try:
                res = resolver.resolve_detailed(
                    op.name, op.context, op.demands, private_context=op.private_context,
                    accept_negotiation=op.accept_negotiation, withheld=op.withheld,
                    requester_name=op.requester or resolver.requester_name)
            except UalError as exc:
                result.error = exc.code
            else:
                r = res.response
                result.kind = "negotiated" if r.policy_used == "negotiated" else "tailored"
                result.endpoint = r.endpoint_url
                result.policy = r.policy_used if isinstance(r.policy_used, str) else r.policy_used.value
                result.queries = res.upstream_queries
                result.from_cache = res.from_cache
                result.session_id = r.session_id
            self.report.calls.append(result)

    def _op_status(self, op: StatusOp) -> None:
        server = self.servers[self.agent_server[canonicalize(op.agent)]]
        server.update_status(op.agent, op.endpoint, op.load, op.healthy)

    def _op_record(self, op: RecordOp) -> None:
        self.servers[op.server].record_agent(op.record)
        self.agent_server[op.record.agent_name] = op.server
        self.inbound.setdefault(op.record.agent_name, True)

    def _op_relocate(self, op: RelocateOp) -> None:
        placement = self._placement(op.call)
        if placement is None or op.component not in placement.assignment:
            raise ScenarioInvalid(f"call {op.call} produced no placement for {op.component}")
        server = self.servers[self.agent_server[canonicalize(op.agent)]]
        rid = placement.assignment[op.component]
        resource = next(r for s in self.servers.values() for r in s.resources if r.resource_id == rid)
        record = server.get_record(op.agent)
        label = record.agent_name.rsplit(":", 1)[-1]
        moved = tuple(e.model_copy(update={"url": f"{resource.base_url()}/agents/{label}",
                                           "geo": resource.geo}) for e in record.endpoints[:1])
        server.record_agent(record.model_copy(update={"endpoints": moved}))

    def _op_advance(self, op: AdvanceOp) -> None:
        self.clock.advance(op.seconds)

    def _op_connect(self, op: ConnectOp) -> None:
        url = op.url
        if op.call is not None:
            url = next((c.endpoint for c in reversed(self.report.calls) if c.call == op.call and c.endpoint), None)
        if url is None:
            self.report.connections.append(Connection(id=op.id, agent=op.agent, url="", accepted=False))
            return
        relay = next((r for r in self.relays.values() if r.serves(url)), None)
        if relay is not None:
            relay.connect(canonicalize(op.agent))
            self.report.connections.append(Connection(id=op.id, agent=op.agent, url=url, accepted=True,
                                                      via_relay=relay.url))
            return
        owner = next((name for name in self.agent_server
                      if any(e.url == url for e in self.record_of(name).endpoints)), None)
        accepted = owner is None or self.inbound.get(owner, True)
        self.report.connections.append(Connection(id=op.id, agent=op.agent, url=url, accepted=accepted))

    def _op_sweep(self, op: SweepOp) -> None:
        self.report.sweeps[op.id] = self.servers[op.server].sessions.sweep_inactive()

    # -- assertions -------------------------------------------------------

    def calls(self, call_id: str) -> list[CallResult]:
        return [c for c in self.report.calls if c.call == call_id]

    def _placement(self, call_id: str):
        for c in reversed(self.calls(call_id)):
            if c.session_id:
                server = self.servers[self.agent_server[c.name]]
                return server.sessions.get(c.session_id).placement
        return None

    def _check_endpoint_equals(self, a) -> tuple[bool, str]:
        got = [c.endpoint for c in self.calls(a.call)]
        return all(g == a.url for g in got), f"{a.call} -> {sorted(set(map(str, got)))}"

    def _check_all_same_endpoint(self, a) -> tuple[bool, str]:
        got = {c.endpoint for cid in a.calls for c in self.calls(cid)}
        return len(got) == 1 and None not in got, f"distinct endpoints {sorted(map(str, got))}"

    def _check_nearest_endpoint(self, a) -> tuple[bool, str]:
        bad = []
        for c, (ctx, candidates, _) in zip(self.calls(a.call), self.snapshots.get(a.call, [])):
            healthy = [e for e in candidates if e.healthy]
            if ctx.geo is None or not healthy:
                bad.append(f"#{c.seq}: no geo or no candidates")
                continue
            here = {"lat": ctx.geo.lat, "lon": ctx.geo.lon}
            dists = {e.url: _great_circle_km(here, {"lat": e.geo.lat, "lon": e.geo.lon}) for e in healthy}
            best = min(dists.values())
            nearest = {u for u, d in dists.items() if d <= best + 1e-9}
            if c.endpoint not in nearest:
                bad.append(f"#{c.seq}: got {c.endpoint}, nearest {sorted(nearest)}")
        return not bad, "; ".join(bad) or f"{len(self.calls(a.call))} calls matched the nearest endpoint"

    def _check_kind_equals(self, a) -> tuple[bool, str]:
        got = [c.kind if c.kind != "error" else f"error:{c.error}" for c in self.calls(a.call)]
        return all(g == a.kind for g in got), f"{a.call} kinds {sorted(set(got))}"

    def _check_load_ratio_max(self, a) -> tuple[bool, str]:
        spread = load_spread_report(self.report, calls=a.calls, endpoints=a.endpoints or None)
        return spread["ratio"] <= a.max_ratio, (f"max {spread['max_load']} min {spread['min_load']} "
                                                 f"ratio {spread['ratio']:.3f} <= {a.max_ratio}")

    def _check_zero_selections(self, a) -> tuple[bool, str]:
        n = sum(1 for c in self.report.calls if c.endpoint == a.url)
        return n == 0, f"{a.url} selected {n} times"

    def _check_relay_connected(self, a) -> tuple[bool, str]:
        relay = self.relays[a.relay.rstrip("/")]
        want = [canonicalize(x) for x in a.agents]
        missing = [x for x in want if x not in relay.members]
        return not missing, f"members {relay.members}" + (f", missing {missing}" if missing else "")

    def _check_colocated(self, a) -> tuple[bool, str]:
        placement = self._placement(a.call)
        if placement is None:
            return False, f"{a.call} produced no placement"
        where = {c: placement.assignment.get(c) for c in a.components}
        return len(set(where.values())) == 1 and None not in where.values(), f"assignment {where}"

    def _check_endpoint_role(self, a) -> tuple[bool, str]:
        bad = []
        for c, (_, candidates, _) in zip(self.calls(a.call), self.snapshots.get(a.call, [])):
            roles = {e.url: e.role for e in candidates}
            if roles.get(c.endpoint) != a.role:
                bad.append(f"#{c.seq}: {c.endpoint} has role {roles.get(c.endpoint)}")
        return not bad, "; ".join(bad) or f"all {a.call} endpoints have role {a.role}"

    def _check_query_count(self, a) -> tuple[bool, str]:
        calls = self.calls(a.call)
        if a.index is not None:
            calls = calls[a.index:a.index + 1]
        got = [c.queries for c in calls]
        return bool(got) and all(g == a.equals for g in got), f"{a.call} upstream queries {got}"

    def _check_swept_count(self, a) -> tuple[bool, str]:
        swept = self.report.sweeps.get(a.sweep, [])
        return len(swept) == a.equals, f"{a.sweep} swept {len(swept)}"


def load_spread_report(report: ScenarioReport, calls: tuple[str, ...] | list[str] | None = None,
                       endpoints: tuple[str, ...] | list[str] | None = None) -> dict[str, float]:
    """Selection counts per endpoint: max, min (at least 1) and their ratio.

    With ``endpoints`` given, endpoints never selected count as 0 selections.
    """
    chosen = [c.endpoint for c in report.calls
              if c.endpoint and (calls is None or c.call in calls)]
    hist = Counter(chosen)
    for url in endpoints or ():
        hist.setdefault(url, 0)
    if not hist:
        return {"max_load": 0, "min_load": 0, "ratio": 1.0}
    hi, lo = max(hist.values()), min(hist.values())
    return {"max_load": hi, "min_load": lo, "ratio": hi / max(lo, 1)}


def run_scenario(scenario: Scenario | dict | str, *, raise_on_failure: bool = True) -> ScenarioReport:
    """Boot the scenario's services, run its workload and evaluate its assertions.

    Raises AssertionFailed (carrying the report) when any assertion fails.
    """
    s = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    report = _Run(s).run()
    if raise_on_failure and not report.passed:
        failed = [a.check for a in report.assertions if not a.passed]
        raise AssertionFailed(f"scenario {s.name}: failed {failed}", report)
    return report
