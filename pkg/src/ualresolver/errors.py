"""Exception hierarchy shared by every service.

Each error carries a stable ``code`` used on the wire and the HTTP status the
services answer with.
"""

from __future__ import annotations


class UalError(Exception):
    code = "error"
    http_status = 500

    def __init__(self, message: str = "", **detail: object) -> None:
        super().__init__(message or self.code)
        self.message = message or self.code
        self.detail = detail


class MalformedName(UalError, ValueError):
    code = "malformed_name"
    http_status = 422


class OutOfRange(UalError, IndexError):
    code = "out_of_range"
    http_status = 422


class MalformedContext(UalError, ValueError):
    code = "malformed_context"
    http_status = 422


class MalformedCard(UalError, ValueError):
    code = "malformed_card"
    http_status = 422


class MalformedRecord(UalError, ValueError):
    code = "malformed_record"
    http_status = 422


class MalformedQuery(UalError, ValueError):
    code = "malformed_query"
    http_status = 422


class MalformedSpec(UalError, ValueError):
    code = "malformed_spec"
    http_status = 422


class NotFound(UalError, LookupError):
    code = "not_found"
    http_status = 404


class NameNotFound(NotFound):
    code = "name_not_found"


class ZoneConflict(UalError):
    code = "zone_conflict"
    http_status = 409


class NotMyZone(UalError):
    code = "not_my_zone"
    http_status = 403


class Unauthorized(UalError):
    code = "unauthorized"
    http_status = 401


class NoCandidates(UalError):
    code = "no_candidates"
    http_status = 503


class MissingContext(UalError):
    code = "missing_context"
    http_status = 422

    def __init__(self, field: str) -> None:
        super().__init__(f"context field {field!r} is required", field=field)
        self.field = field


class NegotiationDeclined(UalError):
    code = "negotiation_declined"
    http_status = 428


class NegotiationFailed(UalError):
    code = "negotiation_failed"
    http_status = 409


class SessionExpired(UalError):
    code = "session_expired"
    http_status = 410


class Infeasible(UalError):
    code = "infeasible"
    http_status = 409


class DeployFailed(UalError):
    code = "deploy_failed"
    http_status = 502


class ResolutionLoop(UalError):
    code = "resolution_loop"
    http_status = 508


class DepthExceeded(UalError):
    code = "depth_exceeded"
    http_status = 508


class Unreachable(UalError):
    code = "unreachable"
    http_status = 502


class DecodeError(UalError, ValueError):
    code = "decode_error"
    http_status = 422


class VersionMismatch(UalError, ValueError):
    code = "version_mismatch"
    http_status = 400


class ScenarioInvalid(UalError, ValueError):
    code = "scenario_invalid"
    http_status = 422


class AssertionFailed(UalError):
    code = "assertion_failed"
    http_status = 500

    def __init__(self, message: str, report: object = None) -> None:
        super().__init__(message)
        self.report = report


ERRORS_BY_CODE: dict[str, type[UalError]] = {}


def _collect(cls: type[UalError]) -> None:
    for sub in cls.__subclasses__():
        ERRORS_BY_CODE.setdefault(sub.code, sub)
        _collect(sub)


_collect(UalError)
ERRORS_BY_CODE["error"] = UalError


def error_from_code(code: str, message: str, detail: dict | None = None) -> UalError:
    """Rebuild a typed exception from its wire representation."""
    cls = ERRORS_BY_CODE.get(code, UalError)
    if cls is MissingContext:
        return MissingContext(str((detail or {}).get("field", message)))
    if cls is AssertionFailed:
        return AssertionFailed(message)
    err = cls(message)
    err.detail = dict(detail or {})
    return err


class BadReferral(UalError):
    code = "bad_referral"
    http_status = 502


ERRORS_BY_CODE["bad_referral"] = BadReferral
