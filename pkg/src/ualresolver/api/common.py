"""Envelope plumbing shared by the FastAPI apps."""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import Response
from pydantic import BaseModel

from .. import wire
from ..errors import DecodeError, UalError
from ..wire import Envelope

log = logging.getLogger(__name__)

SECRET_HEADER = "x-ual-secret"


def reply(message: BaseModel, status: int = 200) -> Response:
    return Response(content=wire.encode(message), media_type="application/json", status_code=status)


def error_reply(exc: UalError) -> Response:
    return reply(wire.error_body(exc), exc.http_status)


def unwrap(env: Envelope, expect: str) -> BaseModel:
    """Check an incoming envelope and decode its body as ``expect``."""
    if env.v != wire.VERSION:
        raise wire.VersionMismatch(f"unsupported protocol version {env.v!r}", expected=wire.VERSION)
    if env.kind not in wire.MESSAGE_TYPES:
        raise wire.UnknownKind(f"unknown message kind {env.kind!r}")
    if env.kind != expect:
        raise DecodeError(f"expected a {expect!r} message, got {env.kind!r}")
    wire.parse_ts(env.ts)
    return wire.decode_body(env.kind, env.body)


def install_error_handlers(app: FastAPI) -> None:
    @app.exception_handler(UalError)
    async def _domain(request: Request, exc: UalError) -> Response:
        return error_reply(exc)

    @app.exception_handler(RequestValidationError)
    async def _invalid(request: Request, exc: RequestValidationError) -> Response:
        # The version check must win over schema errors for any well-formed object.
        try:
            raw = await request.body()
            wire.decode_envelope(raw)
        except UalError as err:
            return error_reply(err)
        return error_reply(DecodeError(f"invalid request: {exc.errors()}"))
