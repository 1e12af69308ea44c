from __future__ import annotations

from fastapi import FastAPI

from ..resolver import RecursiveResolver
from ..wire import Ack, Envelope
from .common import install_error_handlers, reply, unwrap


def create_resolver_app(resolver: RecursiveResolver) -> FastAPI:
    """Standalone resolver daemon proxying the recursion for thin clients."""
    app = FastAPI(title="UAL recursive resolver", version="0.1")
    app.state.resolver = resolver
    install_error_handlers(app)

    @app.get("/healthz")
    def healthz():
        return reply(Ack())

    @app.post("/resolve")
    def resolve(env: Envelope):
        query = unwrap(env, "resolver_query")
        answer = resolver.resolve(query.name, query.context, accept_negotiation=query.accept_negotiation)
        return reply(answer)

    return app
