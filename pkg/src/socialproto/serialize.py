"""Canonical serialization of the whole community state.

Used to compare a live state against a replay of its event log byte for byte,
and to snapshot state over the API. Every collection serializes in sorted
order so equal states produce identical text.
"""

from __future__ import annotations

from typing import Mapping

from .engine import EventKind, Group, ProcessStatus, SocialProcess, TransitionEvent
from .inheritance import (
    CatalogScope,
    LineageEdge,
    PrivateScope,
    ProtocolRepository,
    PVCState,
    Scope,
)
from .model import Environment, canonical_json, protocol_to_doc
from .negotiation import (
    NegotiationSession,
    SessionStatus,
    proposal_from_doc,
    proposal_to_doc,
    record_from_doc,
    record_to_doc,
    rule_from_doc,
    rule_to_doc,
    VoteValue,
)


def group_to_doc(group: Group) -> dict:
    return {
        "group_id": group.group_id,
        "members": {cid: sorted(roles) for cid, roles in sorted(group.members.items())},
        "environment_ref": group.environment_ref,
    }


def group_from_doc(doc: Mapping) -> Group:
    return Group(
        group_id=doc["group_id"],
        members={cid: frozenset(roles) for cid, roles in doc["members"].items()},
        environment_ref=doc.get("environment_ref"),
    )


def environment_to_doc(env: Environment) -> dict:
    return {
        "env_id": env.env_id,
        "services": {name: sorted(uris) for name, uris in sorted(env.services.items())},
    }


def environment_from_doc(doc: Mapping) -> Environment:
    return Environment(
        env_id=doc["env_id"],
        services={name: frozenset(uris) for name, uris in doc["services"].items()},
    )


def event_to_doc(event: TransitionEvent) -> dict:
    return {
        "seq": event.seq,
        "kind": event.kind.value,
        "transition_id": event.transition_id,
        "actor": event.actor,
        "from_state": event.from_state,
        "to_state": event.to_state,
        "action_result": event.action_result,
        "timestamp": event.timestamp,
    }


def event_from_doc(doc: Mapping) -> TransitionEvent:
    return TransitionEvent(
        seq=doc["seq"],
        kind=EventKind(doc["kind"]),
        transition_id=doc.get("transition_id"),
        actor=doc.get("actor"),
        from_state=doc["from_state"],
        to_state=doc["to_state"],
        action_result=doc.get("action_result"),
        timestamp=doc["timestamp"],
    )


def process_to_doc(process: SocialProcess) -> dict:
    return {
        "process_id": process.process_id,
        "protocol_version": process.protocol_version,
        "group": group_to_doc(process.group),
        "current_state": process.current_state,
        "status": process.status.value,
        "superseded": process.superseded,
        "history": [event_to_doc(e) for e in process.history],
    }


def process_from_doc(doc: Mapping) -> SocialProcess:
    return SocialProcess(
        process_id=doc["process_id"],
        protocol_version=doc["protocol_version"],
        group=group_from_doc(doc["group"]),
        current_state=doc["current_state"],
        status=ProcessStatus(doc["status"]),
        superseded=doc.get("superseded", False),
        history=[event_from_doc(e) for e in doc["history"]],
    )


def session_to_doc(session: NegotiationSession) -> dict:
    return {
        "session_id": session.session_id,
        "process_id": session.process_id,
        "group_id": session.group_id,
        "base_version": session.base_version,
        "participants": sorted(session.participants),
        "rule": rule_to_doc(session.rule),
        "opened_by": session.opened_by,
        "proposals": [proposal_to_doc(p) for p in session.proposals],
        "votes": {
            pid: {voter: value.value for voter, value in sorted(votes.items())}
            for pid, votes in sorted(session.votes.items())
        },
        "status": session.status.value,
        "result_version": session.result_version,
    }


def session_from_doc(doc: Mapping) -> NegotiationSession:
    session = NegotiationSession(
        session_id=doc["session_id"],
        process_id=doc["process_id"],
        group_id=doc["group_id"],
        base_version=doc["base_version"],
        participants=frozenset(doc["participants"]),
        rule=rule_from_doc(doc["rule"]),
        opened_by=doc["opened_by"],
        status=SessionStatus(doc["status"]),
        result_version=doc.get("result_version"),
    )
    session.proposals.extend(proposal_from_doc(p) for p in doc["proposals"])
    for pid, votes in doc["votes"].items():
        session.votes[pid] = {voter: VoteValue(value) for voter, value in votes.items()}
    return session


def scope_to_doc(scope: Scope) -> dict:
    if isinstance(scope, PrivateScope):
        return {"kind": "private", "group_id": scope.group_id}
    return {"kind": "catalog"}


def scope_from_doc(doc: Mapping) -> Scope:
    if doc["kind"] == "private":
        return PrivateScope(group_id=doc["group_id"])
    return CatalogScope()


def repository_to_doc(repo: ProtocolRepository) -> dict:
    return {
        "versions": {vid: protocol_to_doc(p) for vid, p in sorted(repo.versions.items())},
        "edges": [
            {"child": e.child, "parent": e.parent, "negotiation_ref": e.negotiation_ref}
            for _, e in sorted(repo.edges.items())
        ],
        "visibility": {vid: scope_to_doc(s) for vid, s in sorted(repo.visibility.items())},
        "tombstones": sorted(repo.tombstones),
        "history": {sid: record_to_doc(r) for sid, r in sorted(repo.history.items())},
    }


def repository_from_doc(doc: Mapping) -> ProtocolRepository:
    from .model import protocol_from_doc

    return ProtocolRepository(
        versions={vid: protocol_from_doc(p) for vid, p in doc["versions"].items()},
        edges={
            e["child"]: LineageEdge(child=e["child"], parent=e["parent"], negotiation_ref=e.get("negotiation_ref"))
            for e in doc["edges"]
        },
        visibility={vid: scope_from_doc(s) for vid, s in doc["visibility"].items()},
        tombstones=set(doc["tombstones"]),
        history={sid: record_from_doc(r) for sid, r in doc["history"].items()},
    )


def state_to_doc(pvc: PVCState) -> dict:
    return {
        "groups": {gid: group_to_doc(g) for gid, g in sorted(pvc.groups.items())},
        "processes": {pid: process_to_doc(p) for pid, p in sorted(pvc.processes.items())},
        "environments": {eid: environment_to_doc(e) for eid, e in sorted(pvc.environments.items())},
        "sessions": {sid: session_to_doc(s) for sid, s in sorted(pvc.sessions.items())},
        "repository": repository_to_doc(pvc.repository),
    }


def state_from_doc(doc: Mapping) -> PVCState:
    return PVCState(
        groups={gid: group_from_doc(g) for gid, g in doc["groups"].items()},
        processes={pid: process_from_doc(p) for pid, p in doc["processes"].items()},
        environments={eid: environment_from_doc(e) for eid, e in doc["environments"].items()},
        sessions={sid: session_from_doc(s) for sid, s in doc["sessions"].items()},
        repository=repository_from_doc(doc["repository"]),
    )


def serialize_state(pvc: PVCState) -> str:
    """Canonical one-line JSON for a whole community state."""
    return canonical_json(state_to_doc(pvc))
