"""REST surface over the community service.

Thin layer: parse the request, call one service method, map EngineError codes
onto HTTP statuses. Actor identity rides in the X-Collaborator header (query
parameter fallback where the route is a GET).
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..errors import EngineError
from ..inheritance import Scope
from ..serialize import scope_from_doc
from .service import CommunityService

# One status per error code; anything unlisted is a 400.
ERROR_HTTP: dict[str, int] = {
    "UNKNOWN_VERSION": 404,
    "UNKNOWN_PROCESS": 404,
    "UNKNOWN_GROUP": 404,
    "UNKNOWN_SESSION": 404,
    "UNKNOWN_PROPOSAL": 404,
    "UNKNOWN_TRANSITION": 404,
    "UNKNOWN_ENVIRONMENT": 404,
    "UNKNOWN_STATE": 404,
    "NOT_FOUND": 404,
    "ROLE_MISMATCH": 403,
    "UNKNOWN_COLLABORATOR": 403,
    "NOT_PARTICIPANT": 403,
    "FORBIDDEN": 403,
    "WRONG_SOURCE_STATE": 409,
    "PROCESS_COMPLETED": 409,
    "PROCESS_RETIRED": 409,
    "SESSION_CLOSED": 409,
    "SESSION_OPEN": 409,
    "SESSION_ALREADY_OPEN": 409,
    "PROPOSAL_SUPERSEDED": 409,
    "VOTES_PENDING": 409,
    "STATE_MISMATCH": 409,
    "PROTOCOL_MISMATCH": 409,
    "NOT_PRIVATE": 409,
    "NO_PARENT": 409,
    "ADAPTATION_CONFLICT": 409,
    "AMBIGUOUS_START": 409,
    "NOT_IMPLEMENTED_PROTOCOL": 409,
    "ALREADY_RECORDED": 409,
    "INVALID_PROTOCOL": 422,
    "ADAPTATION_INVALID": 422,
    "DUPLICATE_ID": 422,
    "PATCH_TARGET_MISSING": 422,
    "EMPTY_PATCH": 422,
    "INVALID_URI": 422,
    "INVALID_RULE": 422,
    "INVALID_PATCH": 422,
    "INVALID_PARTITION": 422,
    "INVALID_ENVIRONMENT": 422,
    "UNKNOWN_ROLE": 422,
    "UNKNOWN_ROLE_ASSIGNMENT": 422,
    "BINDING_NOT_IN_ENVIRONMENT": 422,
    "VERSION_MISMATCH": 422,
    "SCHEMA_INVALID": 422,
    "MISSING_ACTOR": 400,
    "ACTION_FAILED": 502,
    "STORAGE_FAILURE": 500,
    "CORRUPT_LOG": 500,
}


def _need(body: Mapping[str, Any], key: str) -> Any:
    if key not in body:
        raise EngineError("SCHEMA_INVALID", f"request body is missing {key!r}")
    return body[key]


def _actor(request: Request, body: Optional[Mapping[str, Any]] = None) -> str:
    actor = request.headers.get("X-Collaborator") or (body or {}).get("actor")
    if not actor:
        raise EngineError("MISSING_ACTOR", "identify yourself via the X-Collaborator header")
    return str(actor)


def _scope_arg(body: Mapping[str, Any]) -> Optional[Scope]:
    doc = body.get("scope")
    if doc is None:
        return None
    if not isinstance(doc, Mapping) or doc.get("kind") not in ("private", "catalog"):
        raise EngineError("SCHEMA_INVALID", f"scope must be catalog or private, got {doc!r}")
    if doc["kind"] == "private" and "group_id" not in doc:
        raise EngineError("SCHEMA_INVALID", "private scope needs a group_id")
    return scope_from_doc(doc)


def create_app(service: CommunityService, ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="socialproto", docs_url="/docs")

    @app.exception_handler(EngineError)
    async def engine_error_handler(_request: Request, exc: EngineError):
        return JSONResponse(status_code=ERROR_HTTP.get(exc.code, 400), content={"error": exc.to_dict()})

    @app.exception_handler(KeyError)
    async def key_error_handler(_request: Request, exc: KeyError):
        return JSONResponse(
            status_code=422,
            content={"error": {"code": "SCHEMA_INVALID", "message": f"missing field {exc}", "details": {}}},
        )

    # -- environments and groups ------------------------------------------

    @app.post("/environments", status_code=201)
    async def post_environment(body: dict):
        return service.register_environment(body)

    @app.get("/environments")
    async def get_environments():
        return service.list_environments()

    @app.post("/groups", status_code=201)
    async def post_group(body: dict):
        return service.create_group(body)

    @app.get("/groups")
    async def get_groups():
        return service.list_groups()

    # -- protocols ---------------------------------------------------------

    @app.post("/protocols", status_code=201)
    async def post_protocol(body: dict):
        version = service.register_protocol(_need(body, "protocol"), _scope_arg(body))
        return {"version": version}

    @app.post("/protocols/validate")
    async def post_validate_doc(body: dict):
        return CommunityService.validate_doc(_need(body, "protocol"))

    @app.get("/protocols")
    async def get_protocols():
        return service.list_protocols()

    @app.get("/protocols/{version}")
    async def get_protocol(version: str):
        return service.protocol_view(version)

    @app.post("/protocols/{version}/validate")
    async def post_validate(version: str):
        return service.validate_version(version)

    @app.post("/protocols/{version}/implement")
    async def post_implement(version: str, body: dict):
        new_version = service.implement_version(
            version,
            body.get("role_bindings", []),
            body.get("action_bindings", {}),
            _scope_arg(body),
        )
        return {"version": new_version}

    @app.post("/protocols/{version}/extract")
    async def post_extract(version: str, body: Optional[dict] = None):
        return {"version": service.extract_version(version, _scope_arg(body or {}))}

    @app.post("/protocols/{version}/derive")
    async def post_derive(version: str, body: dict):
        new_version = service.derive(
            version, _need(body, "patch"), _need(body, "group_id"), body.get("negotiation_ref")
        )
        return {"version": new_version}

    # -- processes ---------------------------------------------------------

    @app.post("/processes", status_code=201)
    async def post_process(body: dict):
        return service.instantiate_process(
            _need(body, "version"), _need(body, "group_id"), body.get("start_state")
        )

    @app.get("/processes")
    async def get_processes():
        return service.list_processes()

    @app.get("/processes/{process_id}")
    async def get_process(process_id: str):
        return service.process_view(process_id)

    @app.get("/processes/{process_id}/transitions")
    async def get_transitions(process_id: str, request: Request, collaborator: Optional[str] = None):
        actor = collaborator or request.headers.get("X-Collaborator")
        if not actor:
            raise EngineError("MISSING_ACTOR", "pass ?collaborator= or the X-Collaborator header")
        return service.transitions_for(process_id, actor)

    @app.post("/processes/{process_id}/trigger")
    async def post_trigger(process_id: str, body: dict, request: Request):
        return service.trigger_transition(process_id, _actor(request, body), _need(body, "transition_id"))

    @app.post("/processes/{process_id}/split")
    async def post_split(process_id: str, body: dict):
        return service.split_process(process_id, _need(body, "partition"))

    @app.post("/processes/merge")
    async def post_merge(body: dict):
        return service.merge_processes(_need(body, "process_ids"))

    # -- negotiations ------------------------------------------------------

    @app.post("/negotiations", status_code=201)
    async def post_negotiation(body: dict, request: Request):
        return service.open_session(
            _need(body, "process_id"),
            _actor(request, body),
            _need(body, "patch"),
            body.get("rationale", ""),
            body.get("rule"),
        )

    @app.get("/negotiations")
    async def get_negotiations():
        return service.list_sessions()

    @app.get("/negotiations/{session_id}")
    async def get_negotiation(session_id: str):
        return service.session_view(session_id)

    @app.post("/negotiations/{session_id}/proposals", status_code=201)
    async def post_proposal(session_id: str, body: dict, request: Request):
        return service.propose(
            session_id,
            _actor(request, body),
            _need(body, "patch"),
            body.get("rationale", ""),
            body.get("supersedes"),
        )

    @app.post("/negotiations/{session_id}/votes")
    async def post_vote(session_id: str, body: dict, request: Request):
        return service.vote(session_id, _actor(request, body), _need(body, "proposal_id"), _need(body, "value"))

    @app.post("/negotiations/{session_id}/close")
    async def post_close(session_id: str, request: Request, body: Optional[dict] = None):
        return service.close_session(session_id, _actor(request, body))

    @app.post("/negotiations/{session_id}/record")
    async def post_record(session_id: str, body: dict):
        return service.record_session_history(session_id, body.get("consents", {}))

    # -- propagation, catalog, lineage, history ----------------------------

    @app.post("/propagate")
    async def post_propagate(body: dict, request: Request):
        report = service.propagate(
            _need(body, "version"), _need(body, "strategy"), request.headers.get("X-Collaborator")
        )
        if not report["applied"]:
            return JSONResponse(status_code=409, content=report)
        return report

    @app.post("/adopt")
    async def post_adopt(body: dict):
        result = service.adopt(
            _need(body, "version"),
            _need(body, "group_id"),
            body.get("action_choices"),
            body.get("role_bindings", []),
        )
        if not result["adopted"]:
            return JSONResponse(status_code=409, content=result)
        return result

    @app.get("/catalog")
    async def get_catalog(group: str):
        return service.catalog(group)

    @app.get("/lineage/{version}")
    async def get_lineage(version: str):
        return service.lineage_of(version)

    @app.get("/history/{version}")
    async def get_history(version: str, group: str):
        return service.history_of(version, group)

    # -- introspection -----------------------------------------------------

    @app.get("/events")
    async def get_events(since: int = 0):
        return service.events_since(since)

    @app.get("/state")
    async def get_state():
        return service.state_doc()

    if ui_dir is not None and ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
