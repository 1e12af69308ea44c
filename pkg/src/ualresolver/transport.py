"""How a resolver reaches name servers: in-process or over HTTP."""

from __future__ import annotations

import threading
from collections import Counter
from typing import Callable, Protocol

import httpx
from pydantic import BaseModel

from . import wire
from .adaptive.models import NegotiationOffer, NegotiationReply, PlacementSpec, SessionView
from .errors import UalError, Unreachable, error_from_code
from .messages import ResolverAnswer, ResolverQuery
from .nameserver import NameServer


def split_session_url(url: str) -> tuple[str, str]:
    base, sep, sid = url.rstrip("/").rpartition("/sessions/")
    if not sep or not sid:
        raise Unreachable(f"not a session URL: {url}")
    return base, sid


class Upstream(Protocol):
    def query(self, server_url: str, query: ResolverQuery) -> ResolverAnswer: ...

    def negotiate(self, session_url: str, offer: NegotiationOffer) -> NegotiationReply: ...

    def optimize(self, session_url: str) -> PlacementSpec: ...

    def deploy(self, session_url: str) -> dict[str, str]: ...

    def teardown(self, session_url: str) -> None: ...


class LocalNetwork:
    """Routes calls to in-process NameServer objects by URL."""

    def __init__(self, servers: list[NameServer] | None = None) -> None:
        self.servers: dict[str, NameServer] = {}
        self.queries: Counter[str] = Counter()
        self.down: set[str] = set()
        self._lock = threading.Lock()
        for s in servers or ():
            self.add(s)

    def add(self, server: NameServer) -> NameServer:
        self.servers[server.url] = server
        return server

    def server(self, url: str) -> NameServer:
        url = url.rstrip("/")
        if url in self.down or url not in self.servers:
            raise Unreachable(f"cannot reach {url}")
        return self.servers[url]

    def query(self, server_url: str, query: ResolverQuery) -> ResolverAnswer:
        with self._lock:
            self.queries[server_url.rstrip("/")] += 1
        return self.server(server_url).answer_query(query)

    def negotiate(self, session_url: str, offer: NegotiationOffer) -> NegotiationReply:
        base, sid = split_session_url(session_url)
        return self.server(base).sessions.negotiate(sid, offer)

    def optimize(self, session_url: str) -> PlacementSpec:
        base, sid = split_session_url(session_url)
        return self.server(base).sessions.optimize(sid)

    def deploy(self, session_url: str) -> dict[str, str]:
        base, sid = split_session_url(session_url)
        return self.server(base).sessions.deploy(sid)

    def teardown(self, session_url: str) -> None:
        base, sid = split_session_url(session_url)
        self.server(base).sessions.teardown(sid)


ClientFactory = Callable[[str], httpx.Client]


def default_client(base_url: str) -> httpx.Client:
    return httpx.Client(base_url=base_url, timeout=10.0)


class HttpClient:
    """Envelope-speaking HTTP client for one or more service base URLs.

    ``client_factory`` lets tests route requests into in-process ASGI apps.
    """

    def __init__(self, client_factory: ClientFactory = default_client, secret: str | None = None) -> None:
        self._factory = client_factory
        self._clients: dict[str, httpx.Client] = {}
        self._lock = threading.Lock()
        self.secret = secret

    def _client(self, base_url: str) -> httpx.Client:
        base_url = base_url.rstrip("/")
        with self._lock:
            if base_url not in self._clients:
                self._clients[base_url] = self._factory(base_url)
            return self._clients[base_url]

    def call(self, method: str, url: str, message: BaseModel | None = None,
             expect: str | tuple[str, ...] | None = None) -> BaseModel:
        base, path = _split(url)
        headers = {"content-type": "application/json"}
        if self.secret:
            headers["x-ual-secret"] = self.secret
        content = wire.encode(message) if message is not None else None
        try:
            resp = self._client(base).request(method, path, content=content, headers=headers)
        except httpx.HTTPError as exc:
            raise Unreachable(f"cannot reach {base}: {exc}") from None
        try:
            env = wire.decode_envelope(resp.content)
        except UalError:
            raise Unreachable(f"{base} answered HTTP {resp.status_code} without an envelope") from None
        if env.kind == "error":
            body = wire.decode_body("error", env.body)
            raise error_from_code(body.code, body.message, body.detail)
        if expect is not None:
            allowed = (expect,) if isinstance(expect, str) else expect
            if env.kind not in allowed:
                raise Unreachable(f"{base} answered {env.kind!r}, expected {allowed}")
        return wire.decode_body(env.kind, env.body)

    def close(self) -> None:
        for c in self._clients.values():
            c.close()
        self._clients.clear()


def _split(url: str) -> tuple[str, str]:
    parts = httpx.URL(url)
    base = f"{parts.scheme}://{parts.netloc.decode()}"
    path = parts.raw_path.decode() or "/"
    return base, path


class HttpNetwork(HttpClient):
    """Upstream implementation over HTTP."""

    def __init__(self, client_factory: ClientFactory = default_client, secret: str | None = None) -> None:
        super().__init__(client_factory, secret)
        self.queries: Counter[str] = Counter()

    def query(self, server_url: str, query: ResolverQuery) -> ResolverAnswer:
        self.queries[server_url.rstrip("/")] += 1
        return self.call("POST", server_url.rstrip("/") + "/resolve", query, expect="resolver_answer")

    def negotiate(self, session_url: str, offer: NegotiationOffer) -> NegotiationReply:
        return self.call("POST", session_url + "/negotiate", offer, expect="negotiation_reply")

    def optimize(self, session_url: str) -> PlacementSpec:
        return self.call("POST", session_url + "/optimize", expect="placement_spec")

    def deploy(self, session_url: str) -> dict[str, str]:
        return dict(self.call("POST", session_url + "/deploy", expect="endpoints").endpoints)

    def teardown(self, session_url: str) -> None:
        self.call("DELETE", session_url, expect="ack")

    def session(self, session_url: str) -> SessionView:
        return self.call("GET", session_url, expect="session_view")


class HttpOwner:
    """Resource-owner setup interface reached over HTTP (``POST <url>/setup``)."""

    def __init__(self, url: str, client: HttpClient | None = None) -> None:
        self.url = url.rstrip("/")
        self.client = client or HttpClient()

    def setup(self, session_id: str, section: dict[str, str]) -> bool:
        ack = self.client.call("POST", self.url + "/setup",
                               wire.OwnerSetup(session_id=session_id, section=section), expect="ack")
        return bool(ack.ok)
