from __future__ import annotations

from fastapi import FastAPI, Header

from ..adaptive.models import NegotiationOffer
from ..errors import MalformedRecord
from ..names import canonicalize
from ..nameserver import NameServer
from ..wire import Ack, Endpoints, Envelope
from .common import install_error_handlers, reply, unwrap


def create_nameserver_app(server: NameServer) -> FastAPI:
    app = FastAPI(title="UAL name server", version="0.1")
    app.state.server = server
    install_error_handlers(app)

    @app.get("/healthz")
    def healthz():
        return reply(Ack(detail=server.url))

    @app.post("/resolve")
    def resolve(env: Envelope):
        query = unwrap(env, "resolver_query")
        return reply(server.answer_query(query))

    @app.post("/zones")
    def register_zone(env: Envelope, x_ual_secret: str | None = Header(default=None)):
        reg = unwrap(env, "zone_registration")
        record = server.register_zone(reg.zone, reg.child_server_url, reg.ttl_seconds, reg.kind,
                                      secret=x_ual_secret)
        return reply(record)

    @app.put("/agents/{name}")
    def record_agent(name: str, env: Envelope, x_ual_secret: str | None = Header(default=None)):
        record = unwrap(env, "agent_deployment_record")
        if canonicalize(name) != record.agent_name:
            raise MalformedRecord(f"path names {name!r} but record is for {record.agent_name!r}")
        return reply(server.record_agent(record, secret=x_ual_secret))

    @app.get("/agents/{name}")
    def get_agent(name: str):
        return reply(server.get_record(name))

    @app.patch("/agents/{name}/status")
    def update_status(name: str, env: Envelope, x_ual_secret: str | None = Header(default=None)):
        server._authorize(x_ual_secret)
        upd = unwrap(env, "status_update")
        return reply(server.update_status(name, upd.endpoint_url, upd.load, upd.healthy))

    @app.post("/sessions/{session_id}/negotiate")
    def negotiate(session_id: str, env: Envelope):
        offer: NegotiationOffer = unwrap(env, "negotiation_offer")
        return reply(server.sessions.negotiate(session_id, offer))

    @app.post("/sessions/{session_id}/optimize")
    def optimize(session_id: str):
        return reply(server.sessions.optimize(session_id))

    @app.post("/sessions/{session_id}/deploy")
    def deploy(session_id: str):
        return reply(Endpoints(session_id=session_id, endpoints=server.sessions.deploy(session_id)))

    @app.get("/sessions/{session_id}")
    def session(session_id: str):
        return reply(server.sessions.view(session_id))

    @app.delete("/sessions/{session_id}")
    def teardown(session_id: str):
        changed = server.sessions.teardown(session_id)
        return reply(Ack(detail="torn_down" if changed else "already torn down"))

    return app
