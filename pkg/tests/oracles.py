"""Reference implementations the package is checked against.

None of these import the code under test's algorithms; they recompute the
same quantities by a different route (brute force, another formula, bit
arithmetic).
"""

from __future__ import annotations

import itertools
import math
import socket
from collections import OrderedDict

R_KM = 6371.0


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """atan2 form of the haversine formula."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    a = (math.sin((phi2 - phi1) / 2) ** 2
         + math.cos(phi1) * math.cos(phi2) * math.sin(math.radians(lon2 - lon1) / 2) ** 2)
    a = min(1.0, max(0.0, a))
    return 2 * R_KM * math.atan2(math.sqrt(a), math.sqrt(1 - a))


def _addr_bits(text: str) -> tuple[int, int]:
    """(integer value, bit width) of an IPv4 or IPv6 address."""
    for family, width in ((socket.AF_INET, 32), (socket.AF_INET6, 128)):
        try:
            return int.from_bytes(socket.inet_pton(family, text), "big"), width
        except OSError:
            continue
    raise ValueError(text)


def _net(cidr: str) -> tuple[int, int, int]:
    addr, _, plen = cidr.partition("/")
    value, width = _addr_bits(addr)
    prefix = int(plen) if plen else width
    mask = ((1 << prefix) - 1) << (width - prefix) if prefix else 0
    return value & mask, prefix, width


def cidr_within(outer: str, inner: str) -> bool:
    """True when every address of ``inner`` lies in ``outer``, by masking bits."""
    o_val, o_len, o_w = _net(outer)
    i_val, i_len, i_w = _net(inner)
    if o_w != i_w or i_len < o_len:
        return False
    mask = ((1 << o_len) - 1) << (o_w - o_len) if o_len else 0
    return (i_val & mask) == o_val


class ReferenceLRU:
    """Textbook LRU with per-entry expiry, for differential testing."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.items: OrderedDict = OrderedDict()

    def get(self, key, now: float):
        if key not in self.items:
            return None
        value, expires = self.items[key]
        if now >= expires:
            del self.items[key]
            return None
        self.items.move_to_end(key)
        return value

    def put(self, key, value, ttl: float, now: float) -> None:
        self.items[key] = (value, now + ttl)
        self.items.move_to_end(key)
        while len(self.items) > self.capacity:
            self.items.popitem(last=False)


# -- endpoint selection -------------------------------------------------------

def argmin_indices(scores: list[float], tol: float = 1e-9) -> set[int]:
    best = min(scores)
    return {i for i, s in enumerate(scores) if s <= best + tol}


def geo_scores(candidates: list[dict], here: dict) -> list[float]:
    return [haversine_km(here["lat"], here["lon"], c["geo"]["lat"], c["geo"]["lon"]) for c in candidates]


def load_scores(candidates: list[dict]) -> list[float]:
    return [c.get("current_load", 0.0) for c in candidates]


def weighted_scores(candidates: list[dict], here: dict | None, w_dist: float, w_load: float,
                    w_cost: float) -> list[float]:
    d = geo_scores(candidates, here) if w_dist > 0 else [0.0] * len(candidates)
    c = [x.get("cost_units_per_op", 0.0) for x in candidates]
    md, mc = max(d), max(c)
    return [w_dist * (di / md if md else 0.0) + w_load * x.get("current_load", 0.0) + w_cost * (ci / mc if mc else 0.0)
            for di, ci, x in zip(d, c, candidates)]


# -- placement ----------------------------------------------------------------

def _link(resources: dict, a: str, b: str) -> float:
    if a == b:
        return 0.0
    la = resources[a].get("link_latency_ms", {})
    lb = resources[b].get("link_latency_ms", {})
    return la.get(b, lb.get(a, math.inf))


def check_assignment(spec: dict, resources: dict, assignment: dict) -> tuple[bool, float]:
    """Feasibility and objective of an assignment, from plain dicts."""
    comps = [v["component_id"] for v in spec["variables"]]
    units = {v["component_id"]: v.get("units", 1.0) for v in spec["variables"]}
    for v in spec["variables"]:
        if assignment[v["component_id"]] not in v["candidate_resource_ids"]:
            return False, math.inf
    latency = sum(_link(resources, assignment[a], assignment[b]) for a, b in zip(comps, comps[1:]))
    if math.isinf(latency):
        return False, math.inf
    cost = sum(units[c] * resources[assignment[c]].get("cost_per_unit", 0.0) for c in comps)
    load: dict[str, float] = {}
    for c in comps:
        load[assignment[c]] = load.get(assignment[c], 0.0) + units[c]
    if any(load[r] > resources[r]["capacity_units"] for r in load):
        return False, math.inf
    for con in spec.get("constraints", []):
        kind, args = con["kind"], con.get("args", {})
        if kind == "max_latency_ms" and latency > args["value"]:
            return False, math.inf
        if kind == "max_total_cost" and cost > args["value"]:
            return False, math.inf
        if kind == "min_throughput_mbps":
            for r in set(assignment.values()):
                tp = resources[r].get("throughput_mbps")
                if tp is not None and tp < args["value"]:
                    return False, math.inf
        if kind == "colocate" and len({assignment[c] for c in args["components"]}) > 1:
            return False, math.inf
        if kind == "require_capability" and args["capability"] not in resources[assignment[args["component"]]].get(
                "capabilities", []):
            return False, math.inf
    w = spec.get("objective", {}).get("weights", {})
    return True, w.get("latency", 0.7) * latency + w.get("cost", 0.3) * cost


def exhaustive_optimum(spec: dict, resources: dict) -> float:
    """Best objective over every assignment in the Cartesian product (inf if none feasible)."""
    comps = [v["component_id"] for v in spec["variables"]]
    best = math.inf
    for combo in itertools.product(*(v["candidate_resource_ids"] for v in spec["variables"])):
        ok, obj = check_assignment(spec, resources, dict(zip(comps, combo)))
        if ok and obj < best:
            best = obj
    return best
