"""Placement of channel components onto resources.

The objective of an assignment is ``w_latency * path_latency + w_cost * cost``
where ``path_latency`` sums link latencies along the component chain (in
CommsSpec variable order) and ``cost`` sums ``units * cost_per_unit``.
Resources also carry a capacity: the units placed on a resource may not
exceed it.

Instances with at most ``EXHAUSTIVE_LIMIT`` total assignments are solved
exactly by depth-first branch and bound. Larger ones use greedy best
insertion with bounded backtracking; when that search gives up the instance
is reported infeasible rather than relaxed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal

from ..errors import Infeasible, MalformedSpec
from .models import CommsSpec, PlacementSpec, Resource

EXHAUSTIVE_LIMIT = 10**6
GREEDY_NODE_BUDGET = 50_000


def link_latency(a: Resource, b: Resource) -> float:
    if a.resource_id == b.resource_id:
        return 0.0
    if b.resource_id in a.link_latency_ms:
        return a.link_latency_ms[b.resource_id]
    if a.resource_id in b.link_latency_ms:
        return b.link_latency_ms[a.resource_id]
    return math.inf


@dataclass
class Evaluation:
    cost: float
    latency: float
    objective: float
    violations: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations


def _index(resources: Iterable[Resource]) -> dict[str, Resource]:
    by_id: dict[str, Resource] = {}
    for r in resources:
        if r.resource_id in by_id:
            raise MalformedSpec(f"duplicate resource {r.resource_id!r}")
        by_id[r.resource_id] = r
    return by_id


def evaluate(spec: CommsSpec, resources: Iterable[Resource], assignment: dict[str, str]) -> Evaluation:
    """Score an assignment and list every violated constraint."""
    by_id = _index(resources)
    violations = []
    order = [v.component_id for v in spec.variables]
    missing = [c for c in order if c not in assignment]
    if missing:
        return Evaluation(math.inf, math.inf, math.inf, [f"unassigned: {missing}"])
    for var in spec.variables:
        rid = assignment[var.component_id]
        if rid not in var.candidate_resource_ids:
            violations.append(f"{var.component_id} placed on non-candidate {rid}")
        if rid not in by_id:
            return Evaluation(math.inf, math.inf, math.inf, [f"unknown resource {rid}"])

    cost = sum(v.units * by_id[assignment[v.component_id]].cost_per_unit for v in spec.variables)
    latency = sum(
        link_latency(by_id[assignment[a]], by_id[assignment[b]]) for a, b in zip(order, order[1:])
    )
    if math.isinf(latency):
        violations.append("component chain crosses an unlinked resource pair")

    used: dict[str, float] = {}
    for v in spec.variables:
        used[assignment[v.component_id]] = used.get(assignment[v.component_id], 0.0) + v.units
    for rid, units in used.items():
        if units > by_id[rid].capacity_units:
            violations.append(f"capacity exceeded on {rid}")

    for c in spec.constraints:
        bound = c.args.get("value")
        if c.kind == "max_latency_ms" and latency > bound:
            violations.append(f"latency {latency} > {bound}")
        elif c.kind == "max_total_cost" and cost > bound:
            violations.append(f"cost {cost} > {bound}")
        elif c.kind == "min_throughput_mbps":
            for rid in set(assignment[x] for x in order):
                tp = by_id[rid].throughput_mbps
                if tp is not None and tp < bound:
                    violations.append(f"throughput of {rid} below {bound}")
        elif c.kind == "colocate":
            if len({assignment[x] for x in c.args["components"]}) > 1:
                violations.append(f"components {c.args['components']} not colocated")
        elif c.kind == "require_capability":
            rid = assignment[c.args["component"]]
            if c.args["capability"] not in by_id[rid].capabilities:
                violations.append(f"{rid} lacks {c.args['capability']}")

    w = spec.objective.weights
    objective = w.latency * latency + w.cost * cost
    return Evaluation(cost, latency, objective, violations)


class _Search:
    """Shared partial-assignment machinery for both search modes."""

    def __init__(self, spec: CommsSpec, by_id: dict[str, Resource]) -> None:
        self.spec = spec
        self.by_id = by_id
        self.order = [v.component_id for v in spec.variables]
        self.pos = {c: i for i, c in enumerate(self.order)}
        self.vars = {v.component_id: v for v in spec.variables}
        self.w = spec.objective.weights
        self.max_latency = min((c.args["value"] for c in spec.constraints if c.kind == "max_latency_ms"),
                               default=math.inf)
        self.max_cost = min((c.args["value"] for c in spec.constraints if c.kind == "max_total_cost"),
                            default=math.inf)
        self.min_tp = max((c.args["value"] for c in spec.constraints if c.kind == "min_throughput_mbps"),
                          default=None)
        self.colocate_groups = [c.args["components"] for c in spec.constraints if c.kind == "colocate"]
        self.capabilities: dict[str, list[str]] = {}
        for c in spec.constraints:
            if c.kind == "require_capability":
                self.capabilities.setdefault(c.args["component"], []).append(c.args["capability"])

    def static_ok(self, comp: str, rid: str) -> bool:
        r = self.by_id[rid]
        if self.min_tp is not None and r.throughput_mbps is not None and r.throughput_mbps < self.min_tp:
            return False
        if self.vars[comp].units > r.capacity_units:
            return False
        return all(cap in r.capabilities for cap in self.capabilities.get(comp, ()))

    def extend(self, partial: dict[str, str], used: dict[str, float], cost: float, latency: float,
               comp: str, rid: str) -> tuple[float, float] | None:
        """Cost and latency after placing ``comp`` on ``rid``, or None if that breaks a bound."""
        var = self.vars[comp]
        if used.get(rid, 0.0) + var.units > self.by_id[rid].capacity_units:
            return None
        for group in self.colocate_groups:
            if comp in group:
                for other in group:
                    if other in partial and partial[other] != rid:
                        return None
        cost += var.units * self.by_id[rid].cost_per_unit
        i = self.pos[comp]
        for j in (i - 1, i + 1):
            if 0 <= j < len(self.order) and self.order[j] in partial:
                latency += link_latency(self.by_id[rid], self.by_id[partial[self.order[j]]])
        if math.isinf(latency) or latency > self.max_latency or cost > self.max_cost:
            return None
        return cost, latency

    def objective(self, cost: float, latency: float) -> float:
        return self.w.latency * latency + self.w.cost * cost


def _candidates(spec: CommsSpec, by_id: dict[str, Resource]) -> dict[str, list[str]]:
    out = {}
    for v in spec.variables:
        unknown = [r for r in v.candidate_resource_ids if r not in by_id]
        if unknown:
            raise MalformedSpec(f"component {v.component_id!r} names unknown resources {unknown}")
        out[v.component_id] = list(dict.fromkeys(v.candidate_resource_ids))
    return out


def _exhaustive(search: _Search, cands: dict[str, list[str]]) -> dict[str, str] | None:
    best: list = [math.inf, None]
    order = search.order

    def dfs(k: int, partial: dict[str, str], used: dict[str, float], cost: float, latency: float) -> None:
        if search.objective(cost, latency) >= best[0]:
            return
        if k == len(order):
            best[0], best[1] = search.objective(cost, latency), dict(partial)
            return
        comp = order[k]
        for rid in cands[comp]:
            if not search.static_ok(comp, rid):
                continue
            step = search.extend(partial, used, cost, latency, comp, rid)
            if step is None:
                continue
            partial[comp] = rid
            used[rid] = used.get(rid, 0.0) + search.vars[comp].units
            dfs(k + 1, partial, used, *step)
            used[rid] -= search.vars[comp].units
            del partial[comp]

    dfs(0, {}, {}, 0.0, 0.0)
    return best[1]


def _greedy(search: _Search, cands: dict[str, list[str]], budget: int) -> dict[str, str] | None:
    nodes = [0]

    def dfs(partial: dict[str, str], used: dict[str, float], cost: float, latency: float) -> dict | None:
        if len(partial) == len(search.order):
            return dict(partial)
        nodes[0] += 1
        if nodes[0] > budget:
            return None
        # Best insertion: branch on the most constrained component, cheapest resources first.
        choice = None
        for comp in search.order:
            if comp in partial:
                continue
            options = []
            for rid in cands[comp]:
                if not search.static_ok(comp, rid):
                    continue
                step = search.extend(partial, used, cost, latency, comp, rid)
                if step is not None:
                    options.append((search.objective(*step), rid, step))
            if not options:
                return None
            options.sort(key=lambda o: (o[0], o[1]))
            if choice is None or len(options) < len(choice[1]) or (
                len(options) == len(choice[1]) and options[0][0] < choice[1][0][0]
            ):
                choice = (comp, options)
        comp, options = choice
        for _, rid, step in options:
            partial[comp] = rid
            used[rid] = used.get(rid, 0.0) + search.vars[comp].units
            found = dfs(partial, used, *step)
            used[rid] -= search.vars[comp].units
            del partial[comp]
            if found is not None or nodes[0] > budget:
                return found
        return None

    return dfs({}, {}, 0.0, 0.0)


def assignment_count(spec: CommsSpec) -> int:
    return math.prod(len(set(v.candidate_resource_ids)) for v in spec.variables)


def optimize_placement(spec: CommsSpec, resources: Iterable[Resource],
                       method: Literal["auto", "exhaustive", "greedy"] = "auto",
                       budget: int = GREEDY_NODE_BUDGET) -> PlacementSpec:
    resources = list(resources)
    by_id = _index(resources)
    cands = _candidates(spec, by_id)
    if method == "auto":
        method = "exhaustive" if assignment_count(spec) <= EXHAUSTIVE_LIMIT else "greedy"
    search = _Search(spec, by_id)
    if method == "exhaustive":
        assignment = _exhaustive(search, cands)
    else:
        assignment = _greedy(search, cands, budget)
    if assignment is None:
        raise Infeasible("no assignment satisfies the constraints", method=method)
    ev = evaluate(spec, resources, assignment)
    if not ev.feasible:  # the search prunes on every constraint; this is a safety net
        raise Infeasible(f"search produced an infeasible assignment: {ev.violations}")
    return PlacementSpec(session_id=spec.session_id, assignment=assignment, expected_cost=ev.cost,
                         expected_latency_ms=ev.latency, objective=ev.objective, method=method)
