"""HTTP interface for agent callers.

Queries run concurrently against the engine's current state; mutations are
admitted through a bounded gate and serialized by the engine's writer lock
(overflow returns a retryable 429). Search responses are the canonical
result-document bytes, so a wire response equals the in-process
serialization of the same search.
"""

from __future__ import annotations

import threading
from datetime import date, datetime

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .engine import Engine
from .errors import EmptyQueryError, FusegraphError, ParseError, BusyError
from .graph import parse_edge_line, parse_node_line
from .retrieval import (
    intent_from_dict,
    intent_to_dict,
    canonical_json,
    to_programmable_format,
)

_STATUS_BY_CODE = {
    "ParseError": 400,
    "EmptyContent": 400,
    "InvalidTimestamp": 400,
    "InvalidMutation": 400,
    "SelfLoop": 400,
    "UnknownEndpoint": 400,
    "DimensionMismatch": 400,
    "EmptyQuery": 400,
    "UnresolvableIntent": 400,
    "ConfigError": 400,
    "UnknownNode": 404,
    "DuplicateId": 409,
    "DuplicateEdge": 409,
    "IndexNotBuilt": 409,
    "Busy": 429,
    "RemoteUnavailable": 502,
}


def _error_response(exc: FusegraphError) -> JSONResponse:
    status = _STATUS_BY_CODE.get(exc.code, 500)
    return JSONResponse(
        status_code=status,
        content={"error": {"code": exc.code, "message": str(exc)}},
    )


class _WriteGate:
    """Bounds the number of queued mutations; overflow is a Busy error."""

    def __init__(self, max_pending: int):
        self._slots = threading.BoundedSemaphore(max_pending)

    def __enter__(self):
        if not self._slots.acquire(blocking=False):
            raise BusyError("mutation queue is full; retry later")
        return self

    def __exit__(self, *exc_info):
        self._slots.release()
        return False


def _parse_ref_date(raw) -> date:
    if raw is None:
        return date.today()
    try:
        return datetime.strptime(raw, "%Y-%m-%d").date()
    except (TypeError, ValueError):
        raise ParseError(0, f"invalid reference_date {raw!r}") from None


def create_app(engine: Engine, max_pending: int = 64) -> FastAPI:
    app = FastAPI(title="fusegraph", docs_url=None, redoc_url=None)
    gate = _WriteGate(max_pending)

    @app.exception_handler(FusegraphError)
    async def _handle_known(request: Request, exc: FusegraphError):
        return _error_response(exc)

    @app.get("/v1/health")
    def health():
        active_dim = engine.index.active_dim if engine.index is not None else 0
        return {"status": "ok", "nodes": len(engine.graph), "active_dim": active_dim}

    @app.post("/v1/nodes")
    async def post_node(request: Request):
        body = (await request.body()).decode("utf-8")
        node = parse_node_line(body, 0)
        with gate:
            summary = engine.apply_update([node], [])
        return summary

    @app.post("/v1/edges")
    async def post_edge(request: Request):
        body = (await request.body()).decode("utf-8")
        edge = parse_edge_line(body, 0)
        with gate:
            summary = engine.apply_update([], [edge])
        return summary

    @app.post("/v1/intent")
    async def post_intent(request: Request):
        try:
            obj = await request.json()
        except Exception:
            raise ParseError(0, "body must be a JSON object") from None
        if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
            raise EmptyQueryError("intent parsing requires a text field")
        ref = _parse_ref_date(obj.get("reference_date"))
        intent = engine.parse_intent(obj["text"], ref, k=obj.get("k", 10))
        return Response(
            content=canonical_json(intent_to_dict(intent)),
            media_type="application/json",
        )

    @app.post("/v1/search")
    async def post_search(request: Request):
        try:
            obj = await request.json()
        except Exception:
            raise ParseError(0, "body must be a JSON object") from None
        if not isinstance(obj, dict):
            raise ParseError(0, "body must be a JSON object")
        if "text" in obj:
            if not isinstance(obj["text"], str) or not obj["text"].strip():
                raise EmptyQueryError("search text is empty")
            ref = _parse_ref_date(obj.get("reference_date"))
            k = obj.get("k", 10)
            result = engine.search_text(obj["text"], ref, k=k)
        else:
            try:
                intent = intent_from_dict(obj)
            except ValueError as exc:
                raise ParseError(0, f"invalid intent document: {exc}") from None
            result = engine.search_intent(intent)
        return Response(
            content=to_programmable_format(result), media_type="application/json"
        )

    return app
