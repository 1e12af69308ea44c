"""Channel sessions: the negotiate -> optimize -> deploy -> active lifecycle.

Sessions live on the target's authoritative server. Each session is mutated
under its own lock; the inactivity sweeper skips sessions that are busy with
an in-flight operation (they are, by definition, not idle).
"""

from __future__ import annotations

import logging
import threading
import uuid
from typing import Callable, Iterable, Protocol

from ..clock import Clock, system_clock
from ..context import Context, ContextRequirements
from ..errors import DeployFailed, Infeasible, NotFound, SessionExpired, UalError
from .models import (
    AdaptiveProfile,
    CommsSpec,
    NegotiationOffer,
    NegotiationReply,
    PlacementSpec,
    Resource,
    SessionState,
    SessionView,
)
from .negotiation import TargetNegotiator
from .optimizer import optimize_placement

log = logging.getLogger(__name__)

_ORDER = [SessionState.negotiating, SessionState.optimizing, SessionState.deploying, SessionState.active]


class ResourceOwner(Protocol):
    def setup(self, session_id: str, section: dict[str, str]) -> bool:
        """Deploy ``section`` (component -> resource id); True once complete."""


class OwnerFailed(UalError):
    code = "owner_failed"
    http_status = 502


def deploy(plan: PlacementSpec, spec: CommsSpec, resources: Iterable[Resource],
           owners: dict[str, ResourceOwner]) -> dict[str, str]:
    """Have every resource owner set up its section, then issue endpoints.

    Endpoint URLs are computed only after the last acknowledgment. The first
    participant (the target) attaches at the resource of the last component in
    the chain; every other participant at the resource of the first component.
    """
    by_id = {r.resource_id: r for r in resources}
    sections: dict[str, dict[str, str]] = {}
    for comp, rid in plan.assignment.items():
        sections.setdefault(by_id[rid].owner, {})[comp] = rid
    for owner in sorted(sections):
        setup = owners.get(owner)
        if setup is None:
            raise OwnerFailed(f"no setup interface for owner {owner!r}", owner=owner)
        try:
            acked = setup.setup(plan.session_id, dict(sections[owner]))
        except Exception as exc:  # owner stubs may be remote and fail in any way
            log.warning("owner %s failed during setup: %s", owner, exc)
            acked = False
        if not acked:
            raise OwnerFailed(f"owner {owner!r} did not complete its section", owner=owner)

    order = [v.component_id for v in spec.variables]
    head = by_id[plan.assignment[order[0]]].base_url()
    tail = by_id[plan.assignment[order[-1]]].base_url()
    endpoints = {}
    for i, agent in enumerate(spec.participants):
        base = tail if i == 0 else head
        endpoints[agent] = f"{base}/channels/{plan.session_id}"
    return endpoints


class ChannelSession:
    def __init__(self, session_id: str, target_name: str, negotiator: TargetNegotiator,
                 now: float, timeout_s: int) -> None:
        self.session_id = session_id
        self.target_name = target_name
        self.negotiator = negotiator
        self.state = SessionState.negotiating
        self.last_activity = now
        self.inactivity_timeout_s = timeout_s
        self.comms_spec: CommsSpec | None = None
        self.placement: PlacementSpec | None = None
        self.endpoints: dict[str, str] | None = None
        self.excluded: set[str] = set()
        self.lock = threading.Lock()

    def advance(self, new: SessionState) -> None:
        if new is SessionState.torn_down:
            self.state = new
            return
        if self.state is SessionState.torn_down or _ORDER.index(new) < _ORDER.index(self.state):
            raise SessionExpired(f"session {self.session_id} cannot move {self.state.value} -> {new.value}")
        self.state = new

    def view(self) -> SessionView:
        return SessionView(session_id=self.session_id, state=self.state, last_activity=self.last_activity,
                           inactivity_timeout_s=self.inactivity_timeout_s,
                           endpoints=dict(self.endpoints) if self.endpoints else None)


class SessionManager:
    """All channel sessions brokered by one authoritative server."""

    def __init__(self, clock: Clock = system_clock,
                 resources: Callable[[], list[Resource]] | Iterable[Resource] = (),
                 owners: dict[str, ResourceOwner] | None = None,
                 id_factory: Callable[[], str] = lambda: str(uuid.uuid4())) -> None:
        self._clock = clock
        self._resources = resources if callable(resources) else (lambda r=list(resources): r)
        self.owners: dict[str, ResourceOwner] = dict(owners or {})
        self._id_factory = id_factory
        self._sessions: dict[str, ChannelSession] = {}
        self._lock = threading.Lock()

    def new_id(self) -> str:
        return self._id_factory()

    def open(self, target_name: str, profile: AdaptiveProfile, demands: ContextRequirements,
             shared: Context, session_id: str | None = None) -> ChannelSession:
        sid = session_id or self.new_id()
        negotiator = TargetNegotiator(sid, target_name, profile, demands, shared)
        session = ChannelSession(sid, target_name, negotiator, self._clock(), profile.inactivity_timeout_s)
        with self._lock:
            self._sessions[sid] = session
        return session

    def get(self, session_id: str) -> ChannelSession:
        session = self._sessions.get(session_id)
        if session is None:
            raise NotFound(f"no session {session_id!r}")
        return session

    def _live(self, session_id: str) -> ChannelSession:
        session = self.get(session_id)
        if session.state is SessionState.torn_down:
            raise SessionExpired(f"session {session_id} was torn down")
        return session

    def view(self, session_id: str) -> SessionView:
        return self.get(session_id).view()

    def touch(self, session_id: str) -> None:
        session = self._live(session_id)
        with session.lock:
            session.last_activity = self._clock()

    def negotiate(self, session_id: str, offer: NegotiationOffer) -> NegotiationReply:
        session = self._live(session_id)
        with session.lock:
            self._check_open(session)
            session.last_activity = self._clock()
            if session.state is not SessionState.negotiating:
                if session.negotiator.done is not None:
                    return session.negotiator.done
            reply = session.negotiator.step(offer)
            if reply.status == "agreed":
                session.comms_spec = reply.comms_spec
                session.advance(SessionState.optimizing)
            elif reply.status == "failed":
                session.advance(SessionState.torn_down)
            return reply

    def optimize(self, session_id: str) -> PlacementSpec:
        session = self._live(session_id)
        with session.lock:
            self._check_open(session)
            session.last_activity = self._clock()
            if session.comms_spec is None:
                raise SessionExpired(f"session {session_id} has no agreed comms spec")
            if session.state is SessionState.active:
                return session.placement
            session.advance(SessionState.optimizing)
            session.placement = self._optimize(session)
            return session.placement

    def _optimize(self, session: ChannelSession) -> PlacementSpec:
        resources = [r for r in self._resources() if r.resource_id not in session.excluded]
        known = {r.resource_id for r in resources}
        spec = session.comms_spec
        variables = []
        for v in spec.variables:
            cands = tuple(r for r in v.candidate_resource_ids if r in known)
            if not cands:
                raise Infeasible(f"no remaining resources for component {v.component_id!r}")
            variables.append(v.model_copy(update={"candidate_resource_ids": cands}))
        trimmed = spec.model_copy(update={"variables": tuple(variables)})
        return optimize_placement(trimmed, resources)

    def deploy(self, session_id: str) -> dict[str, str]:
        """Deploy the current placement; one re-optimization if an owner fails."""
        session = self._live(session_id)
        with session.lock:
            self._check_open(session)
            if session.state is SessionState.active:
                return dict(session.endpoints)
            if session.placement is None:
                raise SessionExpired(f"session {session_id} has no placement to deploy")
            session.last_activity = self._clock()
            for attempt in range(2):
                session.advance(SessionState.deploying)
                try:
                    endpoints = deploy(session.placement, session.comms_spec, self._resources(), self.owners)
                except OwnerFailed as exc:
                    owner = exc.detail.get("owner")
                    failed = {rid for rid in session.placement.assignment.values()
                              if self._owner_of(rid) == owner}
                    session.excluded |= failed
                    session.state = SessionState.optimizing
                    if attempt == 1:
                        break
                    try:
                        session.placement = self._optimize(session)
                    except Infeasible:
                        break
                    continue
                session.endpoints = endpoints
                session.placement = session.placement.model_copy(update={"endpoints": endpoints})
                session.advance(SessionState.active)
                session.last_activity = self._clock()
                return dict(endpoints)
            session.advance(SessionState.torn_down)
            raise DeployFailed(f"deployment of session {session_id} failed")

    def _owner_of(self, resource_id: str) -> str | None:
        for r in self._resources():
            if r.resource_id == resource_id:
                return r.owner
        return None

    def _check_open(self, session: ChannelSession) -> None:
        if session.state is SessionState.torn_down:
            raise SessionExpired(f"session {session.session_id} was torn down")
        if self._clock() - session.last_activity > session.inactivity_timeout_s:
            session.advance(SessionState.torn_down)
            raise SessionExpired(f"session {session.session_id} timed out")

    def teardown(self, session_id: str) -> bool:
        """Tear a session down; False if it already was."""
        session = self.get(session_id)
        with session.lock:
            if session.state is SessionState.torn_down:
                return False
            session.advance(SessionState.torn_down)
            return True

    def sweep_inactive(self, now: float | None = None) -> list[str]:
        now = self._clock() if now is None else now
        with self._lock:
            sessions = list(self._sessions.values())
        swept = []
        for session in sessions:
            if not session.lock.acquire(blocking=False):
                continue
            try:
                if session.state is SessionState.torn_down:
                    continue
                if now - session.last_activity > session.inactivity_timeout_s:
                    session.advance(SessionState.torn_down)
                    swept.append(session.session_id)
            finally:
                session.lock.release()
        return sorted(swept)
