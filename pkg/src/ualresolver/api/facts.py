from __future__ import annotations

from fastapi import FastAPI, Query

from ..errors import DecodeError, MalformedCard
from ..facts import FactsRegistry
from ..names import canonicalize
from ..wire import Ack, Envelope, FactsList
from .common import install_error_handlers, reply, unwrap


def create_facts_app(registry: FactsRegistry) -> FastAPI:
    app = FastAPI(title="AgentFacts registry", version="0.1")
    app.state.registry = registry
    install_error_handlers(app)

    @app.get("/healthz")
    def healthz():
        return reply(Ack())

    @app.put("/facts/{name}")
    def publish(name: str, env: Envelope):
        try:
            card = unwrap(env, "agent_facts_card")
        except DecodeError as exc:
            raise MalformedCard(exc.message) from None
        if canonicalize(name) != card.agent_name:
            raise MalformedCard(f"path names {name!r} but card is for {card.agent_name!r}")
        return reply(registry.publish_facts(card))

    @app.get("/facts/{name}")
    def get(name: str):
        return reply(registry.get_facts(name))

    @app.get("/facts")
    def find(tag: str = Query(...)):
        return reply(FactsList(cards=tuple(registry.find_by_tag(tag))))

    return app
