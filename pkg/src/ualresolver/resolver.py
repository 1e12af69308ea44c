"""Recursive resolver: walks referrals from the namespace root to the
authoritative server, caching referrals by zone and tailored answers by
(name, context fingerprint), and brokers the adaptive handshake when the
authoritative server answers with a negotiation invitation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from .cache import DEFAULT_CAPACITY, MISS, TTLCache
from .clock import Clock, system_clock
from .context import ABSENT, Context, ContextRequirements, fingerprint, get_field, merge_contexts, set_fields
from .errors import (
    BadReferral,
    DepthExceeded,
    NameNotFound,
    NegotiationDeclined,
    NegotiationFailed,
    ResolutionLoop,
    Unreachable,
)
from .adaptive.negotiation import negotiate
from .messages import NegotiationInvitation, Referral, ResolverQuery, TailoredResponse
from .names import AgentName, derive_root_url, format_canonical, parse_ual, zone_of
from .transport import Upstream

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 10
NEGATIVE_TTL = 30
ANONYMOUS_REQUESTER = "ual:anonymous.invalid:requester"


@dataclass
class Resolution:
    response: TailoredResponse
    upstream_queries: int = 0
    servers: list[str] = field(default_factory=list)
    from_cache: bool = False


class RecursiveResolver:
    """Resolve agent names on behalf of a requester.

    ``roots`` overrides the https root URL derived from a namespace id, which
    lets tests and private deployments run without public DNS.
    """

    def __init__(self, upstream: Upstream, roots: dict[str, str] | None = None, *,
                 clock: Clock = system_clock, cache_size: int = DEFAULT_CAPACITY,
                 max_depth: int = DEFAULT_MAX_DEPTH, negative_ttl: float = NEGATIVE_TTL,
                 requester_name: str = ANONYMOUS_REQUESTER) -> None:
        self.upstream = upstream
        self.roots = {k.lower(): v.rstrip("/") for k, v in (roots or {}).items()}
        self.clock = clock
        self.cache = TTLCache(cache_size, clock)
        self.max_depth = max_depth
        self.negative_ttl = negative_ttl
        self.requester_name = requester_name

    def root_url(self, nid: str) -> str:
        return self.roots.get(nid) or derive_root_url(nid)

    def resolve(self, name: str, context: Context | None = None,
                requester_requirements: ContextRequirements | None = None, **kw) -> TailoredResponse:
        return self.resolve_detailed(name, context, requester_requirements, **kw).response

    def cached_answer(self, key: str, context: Context) -> TailoredResponse | None:
        fields = self.cache.get(("fields", key))
        if fields is MISS:
            return None
        hit = self.cache.get(("tailored", key, fingerprint(context, fields).digest))
        return None if hit is MISS else hit

    def _start(self, name: AgentName) -> tuple[str, int]:
        for depth in range(len(name.path), 0, -1):
            ref = self.cache.get(("zone", zone_of(name, depth)))
            if ref is not MISS:
                return ref.next_server_url, depth
        return self.root_url(name.nid), 0

    def resolve_detailed(self, name: str, context: Context | None = None,
                         requester_requirements: ContextRequirements | None = None, *,
                         private_context: Context | None = None, accept_negotiation: bool = True,
                         withheld: Iterable[str] = (), requester_name: str | None = None) -> Resolution:
        parsed = parse_ual(name)
        key = format_canonical(parsed)
        context = context or Context()
        if self.cache.get(("nx", key)) is not MISS:
            raise NameNotFound(f"{key} does not exist (cached)")
        cached = self.cached_answer(key, context)
        if cached is not None:
            return Resolution(cached, 0, [], True)

        server, depth = self._start(parsed)
        limit = min(len(parsed.path) + 1, self.max_depth)
        visited: list[str] = []
        requery = False
        queries = 0
        query = ResolverQuery(name=key, context=context, accept_negotiation=accept_negotiation)
        while True:
            if server in visited:
                raise ResolutionLoop(f"{server} referred back into the chain for {key}", servers=visited)
            if len(visited) >= limit:
                raise DepthExceeded(f"{key} needs more than {limit} queries", servers=visited)
            visited.append(server)
            queries += 1
            try:
                answer = self.upstream.query(server, query)
            except NameNotFound:
                self.cache.put(("nx", key), True, self.negative_ttl)
                raise
            body = answer.body
            if isinstance(body, Referral):
                if not body.zone.is_prefix_of(parsed):
                    raise BadReferral(f"{server} referred {key} to unrelated zone {body.zone}")
                if body.zone.depth <= depth:
                    raise ResolutionLoop(f"{server} referred {key} back up to zone {body.zone}",
                                         servers=visited)
                self.cache.put(("zone", body.zone), body, body.ttl_seconds)
                server, depth = body.next_server_url.rstrip("/"), body.zone.depth
                continue
            if isinstance(body, TailoredResponse):
                if body.ttl_seconds > 0:
                    fp = body.fingerprint
                    self.cache.put(("fields", key), fp.fields_covered, body.ttl_seconds)
                    self.cache.put(("tailored", key, fp.digest), body, body.ttl_seconds)
                return Resolution(body, queries, visited)
            if not accept_negotiation:
                raise NegotiationDeclined(f"{key} requires negotiation", session_id=body.session_id,
                                          missing=list(body.missing_fields))
            if body.negotiation_url is None:
                if requery:
                    raise NegotiationFailed(f"{key}: context still unsatisfactory after supplying "
                                            f"{list(body.missing_fields)}")
                context = self._supply(body, context, private_context, withheld)
                query = ResolverQuery(name=key, context=context, accept_negotiation=accept_negotiation)
                visited.remove(server)
                requery = True
                continue
            response = self._handshake(body, context, private_context, requester_requirements, withheld,
                                       requester_name or self.requester_name)
            return Resolution(response, queries, visited)

    def _supply(self, inv: NegotiationInvitation, context: Context, private: Context | None,
                withheld: Iterable[str]) -> Context:
        """Context-only negotiation: disclose the demanded fields, if we can."""
        full = merge_contexts(context, private)
        withheld = set(withheld)
        supplied, refused = {}, []
        for f in inv.missing_fields:
            value = get_field(full, f)
            if value is ABSENT or f in withheld:
                refused.append(f)
            else:
                supplied[f] = value
        if refused or not inv.missing_fields:
            raise NegotiationFailed(f"cannot supply required context {refused or 'restrictions'}",
                                    missing=refused)
        return set_fields(context, supplied)

    def _handshake(self, inv: NegotiationInvitation, context: Context, private: Context | None,
                   demands: ContextRequirements | None, withheld: Iterable[str],
                   requester_name: str) -> TailoredResponse:
        full = merge_contexts(context, private)
        url = inv.negotiation_url

        def channel(offer):
            return self.upstream.negotiate(url, offer)

        negotiate(inv, full, demands, channel, withheld=withheld, requester_name=requester_name)
        self.upstream.optimize(url)
        endpoints = self.upstream.deploy(url)
        if requester_name not in endpoints:
            raise Unreachable(f"deployment issued no endpoint for {requester_name}")
        covered = sorted(inv.target_demands.read_fields())
        return TailoredResponse(endpoint_url=endpoints[requester_name], ttl_seconds=0,
                                fingerprint=fingerprint(full, covered), policy_used="negotiated",
                                session_id=inv.session_id)
