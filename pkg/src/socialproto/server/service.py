"""Command service over the event log.

Every state change follows one discipline: validate against the live state
(dry-running engine operations on copies where needed), append the event(s)
to the log, then mutate state by applying those events. Replay folds the same
apply function over the log, so a replayed state equals the live one byte for
byte under canonical serialization.
"""

from __future__ import annotations

import copy
import json
import urllib.request
from datetime import datetime, timezone
from pathlib import Path
from threading import RLock
from typing import Any, Callable, Iterable, Mapping, Optional, Union
from uuid import uuid4

from ..errors import EngineError
from ..engine import (
    ActionResult,
    EventKind,
    MockActionExecutor,
    SocialProcess,
    TransitionEvent,
    available_transitions,
    commit_transition_event,
    instantiate,
    merge_groups,
    migrate,
    outcome,
    plan_trigger,
    split_group,
)
from ..inheritance import (
    CatalogScope,
    PrivateScope,
    PropagationReport,
    PropagationStrategy,
    PVCState,
    Scope,
    adopt_cross_environment,
    catalog_for,
    derive_version,
    lineage,
    propagate as propagate_op,
    query_history,
    register_protocol,
)
from ..model import (
    RoleBinding,
    SocialProtocol,
    apply_patch,
    extract_abstract,
    implement,
    patch_from_doc,
    patch_to_doc,
    protocol_from_doc,
    protocol_to_doc,
    refinement_level,
    validate_structure,
)
from ..negotiation import (
    SessionStatus,
    Unanimity,
    VoteValue,
    cast_vote,
    close_negotiation,
    open_negotiation,
    propose_amendment,
    record_history,
    rule_from_doc,
    rule_to_doc,
    proposal_to_doc,
    record_to_doc,
)
from ..serialize import (
    environment_from_doc,
    environment_to_doc,
    event_to_doc,
    group_from_doc,
    group_to_doc,
    process_to_doc,
    record_from_doc,
    scope_from_doc,
    scope_to_doc,
    serialize_state,
    session_to_doc,
    state_to_doc,
)
from .eventlog import EventLog, EventRecord, read_log


def apply_event(pvc: PVCState, record: EventRecord) -> None:
    """Advance community state by one event. Replay and live commits both run
    through here; nothing else mutates state."""
    kind, p, ts = record.kind, record.payload, record.timestamp
    repo = pvc.repository

    if kind == "EnvironmentRegistered":
        env = environment_from_doc(p["environment"])
        pvc.environments[env.env_id] = env
    elif kind == "GroupCreated":
        group = group_from_doc(p["group"])
        pvc.groups[group.group_id] = group
    elif kind == "ProtocolRegistered":
        # protocol_from_doc re-verifies the content hash against the stated version
        register_protocol(repo, protocol_from_doc(p["protocol"]), scope_from_doc(p["scope"]))
    elif kind == "VersionDerived":
        candidate = derive_version(
            repo,
            p["parent_version"],
            patch_from_doc(p["patch"]),
            group_id=p["group_id"],
            negotiation_ref=p["negotiation_ref"],
        )
        if candidate.version != p["version"]:
            raise EngineError(
                "CORRUPT_LOG",
                f"event {record.global_seq} derives {candidate.version}, log claims {p['version']}",
            )
    elif kind == "ProcessInstantiated":
        protocol = repo.get(p["protocol_version"])
        group = pvc.groups[p["group_id"]]
        process = instantiate(protocol, group, process_id=p["process_id"], start_state=p["start_state"])
        pvc.processes[process.process_id] = process
    elif kind == "TransitionTriggered":
        process = pvc.processes[p["process_id"]]
        protocol = repo.get(process.protocol_version)
        event = TransitionEvent(
            seq=process.next_seq(),
            kind=EventKind.STEP,
            transition_id=p["transition_id"],
            actor=p["actor"],
            from_state=p["from_state"],
            to_state=p["to_state"],
            action_result=p["action_result"],
            timestamp=ts,
        )
        commit_transition_event(process, protocol, event)
    elif kind == "ActionFailed":
        process = pvc.processes[p["process_id"]]
        protocol = repo.get(process.protocol_version)
        event = TransitionEvent(
            seq=process.next_seq(),
            kind=EventKind.FAILURE,
            transition_id=p["transition_id"],
            actor=p["actor"],
            from_state=p["state"],
            to_state=p["state"],
            action_result={"ok": False, "error": p["error"]},
            timestamp=ts,
        )
        commit_transition_event(process, protocol, event)
    elif kind == "GroupSplit":
        process = pvc.processes[p["process_id"]]
        children = split_group(
            process,
            p["partition"],
            child_ids=p["child_process_ids"],
            child_group_ids=p["child_group_ids"],
        )
        for child in children:
            pvc.processes[child.process_id] = child
            pvc.groups[child.group.group_id] = child.group
    elif kind == "GroupsMerged":
        processes = [pvc.processes[pid] for pid in p["process_ids"]]
        merged = merge_groups(processes, process_id=p["process_id"], group_id=p["group_id"])
        pvc.processes[merged.process_id] = merged
        pvc.groups[merged.group.group_id] = merged.group
    elif kind == "NegotiationOpened":
        process = pvc.processes[p["process_id"]]
        proposal = p["proposal"]
        session = open_negotiation(
            process,
            p["opened_by"],
            patch_from_doc(proposal["patch"]),
            proposal.get("rationale", ""),
            session_id=p["session_id"],
            proposal_id=proposal["proposal_id"],
            rule=rule_from_doc(p["rule"]),
        )
        pvc.sessions[session.session_id] = session
    elif kind == "ProposalMade":
        session = pvc.sessions[p["session_id"]]
        proposal = p["proposal"]
        propose_amendment(
            session,
            proposal["author"],
            patch_from_doc(proposal["patch"]),
            proposal.get("rationale", ""),
            proposal_id=proposal["proposal_id"],
            supersedes=proposal.get("supersedes"),
        )
    elif kind == "VoteCast":
        cast_vote(pvc.sessions[p["session_id"]], p["voter"], p["proposal_id"], VoteValue(p["value"]))
    elif kind == "NegotiationClosed":
        session = pvc.sessions[p["session_id"]]
        session.status = SessionStatus(p["ruling"])
        session.result_version = p.get("result_version")
    elif kind == "HistoryRecorded":
        repo.history[p["session_id"]] = record_from_doc(p["record"])
    elif kind == "ProcessMigrated":
        process = pvc.processes[p["process_id"]]
        conflict = migrate(process, repo.get(p["to_version"]), now=ts)
        if conflict is not None:
            raise EngineError(
                "CORRUPT_LOG", f"event {record.global_seq} records an impossible migration: {conflict}"
            )
    elif kind == "Propagated":
        report = p["report"]
        if report["strategy"] == "global":
            repo.visibility[report["version"]] = CatalogScope()
        elif report["strategy"] == "instant":
            repo.visibility[report["version"]] = CatalogScope()
            repo.tombstones.add(report["replaced_version"])
        # local propagation changes no state; the event is the record of the decision
    else:  # pragma: no cover - make_record rejects unknown kinds
        raise EngineError("CORRUPT_LOG", f"unknown event kind {kind!r}")


def replay(log_path: Union[str, Path]) -> PVCState:
    """Rebuild community state purely from a log file."""
    pvc = PVCState()
    for record in read_log(log_path):
        try:
            apply_event(pvc, record)
        except EngineError as exc:
            if exc.code == "CORRUPT_LOG":
                raise
            raise EngineError(
                "CORRUPT_LOG", f"event {record.global_seq} ({record.kind}) does not apply: {exc.message}"
            ) from exc
    return pvc


class HttpActionExecutor:
    """POSTs the action context as JSON to the bound endpoint."""

    def __init__(self, timeout: float = 10.0):
        self.timeout = timeout

    def invoke(self, endpoint: str, context: Mapping[str, Any]) -> ActionResult:
        body = json.dumps(dict(context)).encode("utf-8")
        request = urllib.request.Request(
            endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST"
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = response.read().decode("utf-8", errors="replace")
                return ActionResult(ok=True, payload={"status": response.status, "body": payload})
        except Exception as exc:
            return ActionResult(ok=False, error=str(exc))


class CounterIds:
    """Deterministic id factory: proc-1, proc-2, ... per prefix."""

    def __init__(self) -> None:
        self._counters: dict[str, int] = {}

    def new(self, prefix: str) -> str:
        self._counters[prefix] = self._counters.get(prefix, 0) + 1
        return f"{prefix}-{self._counters[prefix]}"


class UuidIds:
    def new(self, prefix: str) -> str:
        return f"{prefix}-{uuid4().hex[:10]}"


class TickClock:
    """Deterministic clock for scenarios and tests: one second per call."""

    def __init__(self, start: str = "2026-01-01T00:00:00+00:00"):
        self._base = datetime.fromisoformat(start)
        self._ticks = 0

    def __call__(self) -> str:
        stamp = self._base.timestamp() + self._ticks
        self._ticks += 1
        return datetime.fromtimestamp(stamp, tz=timezone.utc).isoformat()


def utc_clock() -> str:
    return datetime.now(timezone.utc).isoformat()


class CommunityService:
    """Single-writer facade over one community's event log and state.

    One lock serializes all commands; queries take it too so they never observe
    a half-applied multi-event command.
    """

    def __init__(
        self,
        data_dir: Optional[Union[str, Path]] = None,
        *,
        executor: Optional[Any] = None,
        clock: Optional[Callable[[], str]] = None,
        ids: Optional[Any] = None,
        propagation_guard: Optional[Callable[[str, PropagationStrategy], bool]] = None,
    ):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        log_path = None
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            log_path = self.data_dir / "events.log"
        self.log = EventLog(log_path)
        self.state = PVCState()
        for record in self.log.records:
            try:
                apply_event(self.state, record)
            except EngineError as exc:
                if exc.code == "CORRUPT_LOG":
                    raise
                raise EngineError(
                    "CORRUPT_LOG", f"event {record.global_seq} ({record.kind}) does not apply: {exc.message}"
                ) from exc
        self.executor = executor if executor is not None else MockActionExecutor()
        self.clock = clock or utc_clock
        self.ids = ids or UuidIds()
        self.propagation_guard = propagation_guard
        self.lock = RLock()

    # -- plumbing ----------------------------------------------------------

    def _commit(self, kind: str, payload: dict, *, timestamp: Optional[str] = None) -> EventRecord:
        record = self.log.append(kind, timestamp if timestamp is not None else self.clock(), payload)
        apply_event(self.state, record)
        return record

    def _process(self, process_id: str) -> SocialProcess:
        process = self.state.processes.get(process_id)
        if process is None:
            raise EngineError("UNKNOWN_PROCESS", f"no process {process_id!r}")
        return process

    def _session(self, session_id: str):
        session = self.state.sessions.get(session_id)
        if session is None:
            raise EngineError("UNKNOWN_SESSION", f"no negotiation session {session_id!r}")
        return session

    def _ruling_protocol(self, process: SocialProcess) -> SocialProtocol:
        return self.state.repository.get(process.protocol_version)

    # -- environments and groups ------------------------------------------

    def register_environment(self, doc: Mapping) -> dict:
        env = environment_from_doc(doc)
        with self.lock:
            if env.env_id in self.state.environments:
                raise EngineError("DUPLICATE_ID", f"environment {env.env_id!r} already exists")
            self._commit("EnvironmentRegistered", {"environment": environment_to_doc(env)})
            return environment_to_doc(env)

    def create_group(self, doc: Mapping) -> dict:
        group = group_from_doc(doc)
        with self.lock:
            if group.group_id in self.state.groups:
                raise EngineError("DUPLICATE_ID", f"group {group.group_id!r} already exists")
            if group.environment_ref is not None and group.environment_ref not in self.state.environments:
                raise EngineError("UNKNOWN_ENVIRONMENT", f"no environment {group.environment_ref!r}")
            self._commit("GroupCreated", {"group": group_to_doc(group)})
            return group_to_doc(group)

    # -- protocol lifecycle ------------------------------------------------

    def register_protocol(self, protocol: Union[Mapping, SocialProtocol], scope: Optional[Scope] = None) -> str:
        value = protocol if isinstance(protocol, SocialProtocol) else protocol_from_doc(protocol)
        scope = scope if scope is not None else CatalogScope()
        with self.lock:
            if value.version in self.state.repository.versions:
                return value.version  # content-addressed: same bytes, same entry
            report = validate_structure(value)
            if not report.valid:
                raise EngineError(
                    "INVALID_PROTOCOL",
                    "only structurally valid protocols are registered",
                    findings=[f.code for f in report.errors()],
                )
            if isinstance(scope, PrivateScope) and scope.group_id not in self.state.groups:
                raise EngineError("UNKNOWN_GROUP", f"no group {scope.group_id!r}")
            self._commit(
                "ProtocolRegistered", {"protocol": protocol_to_doc(value), "scope": scope_to_doc(scope)}
            )
            return value.version

    def protocol_view(self, version: str) -> dict:
        with self.lock:
            protocol = self.state.repository.get(version)
            report = validate_structure(protocol)
            return {
                "protocol": protocol_to_doc(protocol),
                "scope": scope_to_doc(self.state.repository.visibility.get(version, CatalogScope())),
                "tombstoned": version in self.state.repository.tombstones,
                "refinement": refinement_level(protocol).value if report.valid else None,
            }

    def validate_version(self, version: str) -> dict:
        with self.lock:
            return validate_structure(self.state.repository.get(version)).to_dict()

    @staticmethod
    def validate_doc(doc: Mapping) -> dict:
        return validate_structure(protocol_from_doc(doc)).to_dict()

    def implement_version(
        self,
        version: str,
        role_bindings: Iterable[Mapping] = (),
        action_bindings: Optional[Mapping[str, str]] = None,
        scope: Optional[Scope] = None,
    ) -> str:
        bindings = [RoleBinding(role=d["role"], collaborators=frozenset(d["collaborators"])) for d in role_bindings]
        with self.lock:
            base = self.state.repository.get(version)
            candidate = implement(base, bindings, dict(action_bindings or {}))
            if candidate.version == base.version:
                return base.version
            return self.register_protocol(candidate, scope)

    def extract_version(self, version: str, scope: Optional[Scope] = None) -> str:
        with self.lock:
            base = self.state.repository.get(version)
            candidate = extract_abstract(base)
            if candidate.version == base.version:
                return base.version
            return self.register_protocol(candidate, scope)

    def derive(
        self,
        parent_version: str,
        patch_doc: Iterable[Mapping],
        group_id: str,
        negotiation_ref: Optional[str] = None,
    ) -> str:
        patch = patch_from_doc(patch_doc)
        with self.lock:
            parent = self.state.repository.get(parent_version)
            if group_id not in self.state.groups:
                raise EngineError("UNKNOWN_GROUP", f"no group {group_id!r}")
            try:
                candidate = apply_patch(parent, patch)
            except EngineError as exc:
                raise EngineError("ADAPTATION_INVALID", f"patch does not apply: {exc.message}") from exc
            report = validate_structure(candidate)
            if not report.valid:
                raise EngineError(
                    "ADAPTATION_INVALID",
                    "patch yields an invalid protocol",
                    findings=[f.code for f in report.errors()],
                )
            self._commit(
                "VersionDerived",
                {
                    "version": candidate.version,
                    "parent_version": parent_version,
                    "patch": patch_to_doc(patch),
                    "group_id": group_id,
                    "negotiation_ref": negotiation_ref,
                },
            )
            return candidate.version

    # -- processes ---------------------------------------------------------

    def instantiate_process(self, version: str, group_id: str, start_state: Optional[str] = None) -> dict:
        with self.lock:
            protocol = self.state.repository.get(version)
            group = self.state.groups.get(group_id)
            if group is None:
                raise EngineError("UNKNOWN_GROUP", f"no group {group_id!r}")
            process_id = self.ids.new("proc")
            probe = instantiate(protocol, group, process_id=process_id, start_state=start_state)
            self._commit(
                "ProcessInstantiated",
                {
                    "process_id": process_id,
                    "protocol_version": version,
                    "group_id": group_id,
                    "start_state": probe.current_state,
                },
            )
            return self.process_view(process_id)

    def process_view(self, process_id: str) -> dict:
        with self.lock:
            process = self._process(process_id)
            protocol = self._ruling_protocol(process)
            return {
                **process_to_doc(process),
                "outcome": outcome(process, protocol),
            }

    def transitions_for(self, process_id: str, collaborator_id: str) -> list[dict]:
        with self.lock:
            process = self._process(process_id)
            protocol = self._ruling_protocol(process)
            return [
                {
                    "id": t.id,
                    "from": t.from_state,
                    "to": t.to_state,
                    "role": t.role,
                    "action": {"name": t.action.name, "binding": t.action.binding},
                }
                for t in available_transitions(process, protocol, collaborator_id)
            ]

    def trigger_transition(self, process_id: str, collaborator_id: str, transition_id: str) -> dict:
        with self.lock:
            process = self._process(process_id)
            protocol = self._ruling_protocol(process)
            planned = plan_trigger(
                process, protocol, collaborator_id, transition_id, executor=self.executor, now=self.clock()
            )
            if planned.kind is EventKind.FAILURE:
                self._commit(
                    "ActionFailed",
                    {
                        "process_id": process_id,
                        "transition_id": transition_id,
                        "actor": collaborator_id,
                        "state": planned.from_state,
                        "error": planned.action_result.get("error"),
                    },
                    timestamp=planned.timestamp,
                )
                raise EngineError(
                    "ACTION_FAILED",
                    f"action behind transition {transition_id!r} failed; the process did not move",
                    transition_id=transition_id,
                    error=planned.action_result.get("error"),
                )
            self._commit(
                "TransitionTriggered",
                {
                    "process_id": process_id,
                    "transition_id": transition_id,
                    "actor": collaborator_id,
                    "from_state": planned.from_state,
                    "to_state": planned.to_state,
                    "action_result": planned.action_result,
                },
                timestamp=planned.timestamp,
            )
            return self.process_view(process_id)

    def _void_open_sessions(self, process_ids: Iterable[str]) -> list[str]:
        affected = set(process_ids)
        voided = []
        for session_id in sorted(self.state.sessions):
            session = self.state.sessions[session_id]
            if session.status is SessionStatus.OPEN and session.process_id in affected:
                self._commit(
                    "NegotiationClosed",
                    {"session_id": session_id, "ruling": "withdrawn", "result_version": None},
                )
                voided.append(session_id)
        return voided

    def split_process(self, process_id: str, partition: Iterable[Iterable[str]]) -> list[dict]:
        cells = [sorted(set(cell)) for cell in partition]
        with self.lock:
            process = self._process(process_id)
            child_process_ids = [self.ids.new("proc") for _ in cells]
            child_group_ids = [self.ids.new("grp") for _ in cells]
            split_group(  # dry-run on a copy: all partition validation happens here
                copy.deepcopy(process), cells, child_ids=child_process_ids, child_group_ids=child_group_ids
            )
            self._commit(
                "GroupSplit",
                {
                    "process_id": process_id,
                    "partition": cells,
                    "child_process_ids": child_process_ids,
                    "child_group_ids": child_group_ids,
                },
            )
            self._void_open_sessions([process_id])
            return [self.process_view(pid) for pid in child_process_ids]

    def merge_processes(self, process_ids: Iterable[str]) -> dict:
        process_ids = list(process_ids)
        with self.lock:
            processes = [self._process(pid) for pid in process_ids]
            merged_id = self.ids.new("proc")
            merged_gid = self.ids.new("grp")
            merge_groups([copy.deepcopy(p) for p in processes], process_id=merged_id, group_id=merged_gid)
            self._commit(
                "GroupsMerged",
                {"process_ids": process_ids, "process_id": merged_id, "group_id": merged_gid},
            )
            self._void_open_sessions(process_ids)
            return self.process_view(merged_id)

    # -- negotiation -------------------------------------------------------

    def open_session(
        self,
        process_id: str,
        initiator: str,
        patch_doc: Iterable[Mapping],
        rationale: str = "",
        rule_doc: Optional[Mapping] = None,
    ) -> dict:
        patch = patch_from_doc(patch_doc)
        rule = rule_from_doc(rule_doc) if rule_doc else Unanimity()
        with self.lock:
            process = self._process(process_id)
            for session in self.state.sessions.values():
                if session.process_id == process_id and session.status is SessionStatus.OPEN:
                    raise EngineError(
                        "SESSION_ALREADY_OPEN",
                        f"process {process_id!r} already has open session {session.session_id!r}",
                    )
            session_id = self.ids.new("neg")
            proposal_id = self.ids.new("prop")
            probe = open_negotiation(
                process, initiator, patch, rationale, session_id=session_id, proposal_id=proposal_id, rule=rule
            )
            self._commit(
                "NegotiationOpened",
                {
                    "session_id": session_id,
                    "process_id": process_id,
                    "group_id": probe.group_id,
                    "base_version": probe.base_version,
                    "participants": sorted(probe.participants),
                    "rule": rule_to_doc(rule),
                    "opened_by": initiator,
                    "proposal": proposal_to_doc(probe.proposals[0]),
                },
            )
            return self.session_view(session_id)

    def session_view(self, session_id: str) -> dict:
        with self.lock:
            return session_to_doc(self._session(session_id))

    def propose(
        self,
        session_id: str,
        author: str,
        patch_doc: Iterable[Mapping],
        rationale: str = "",
        supersedes: Optional[str] = None,
    ) -> dict:
        patch = patch_from_doc(patch_doc)
        with self.lock:
            session = self._session(session_id)
            proposal_id = self.ids.new("prop")
            probe = propose_amendment(
                copy.deepcopy(session), author, patch, rationale, proposal_id=proposal_id, supersedes=supersedes
            )
            self._commit("ProposalMade", {"session_id": session_id, "proposal": proposal_to_doc(probe)})
            return proposal_to_doc(probe)

    def vote(self, session_id: str, voter: str, proposal_id: str, value: str) -> dict:
        try:
            vote_value = VoteValue(value)
        except ValueError:
            raise EngineError("SCHEMA_INVALID", f"vote value must be accept or reject, got {value!r}") from None
        with self.lock:
            session = self._session(session_id)
            cast_vote(copy.deepcopy(session), voter, proposal_id, vote_value)
            self._commit(
                "VoteCast",
                {"session_id": session_id, "proposal_id": proposal_id, "voter": voter, "value": vote_value.value},
            )
            head = session.active_proposal.proposal_id
            votes = self.state.sessions[session_id].votes.get(head, {})
            return {
                "session_id": session_id,
                "proposal_id": proposal_id,
                "tally": {
                    "accept": sum(1 for v in votes.values() if v is VoteValue.ACCEPT),
                    "reject": sum(1 for v in votes.values() if v is VoteValue.REJECT),
                    "pending": len(session.participants) - len(votes),
                },
            }

    def close_session(self, session_id: str, closer: str) -> dict:
        with self.lock:
            session = self._session(session_id)
            process = self._process(session.process_id)
            base = self.state.repository.get(session.base_version)
            # Full dry-run on copies: tally, candidate build, validation, migration check.
            probe = close_negotiation(
                copy.deepcopy(session), closer, base, copy.deepcopy(process), now=self.clock()
            )
            if probe.ruling == "rejected":
                self._commit(
                    "NegotiationClosed",
                    {
                        "session_id": session_id,
                        "ruling": "rejected",
                        "result_version": None,
                        "tally": dict(probe.tally),
                    },
                )
                return {"ruling": "rejected", "tally": dict(probe.tally), "result_version": None}
            candidate = probe.candidate
            assert candidate is not None
            head = session.active_proposal
            timestamp = self.clock()
            self._commit(
                "VersionDerived",
                {
                    "version": candidate.version,
                    "parent_version": session.base_version,
                    "patch": patch_to_doc(head.patch),
                    "group_id": session.group_id,
                    "negotiation_ref": session_id,
                },
                timestamp=timestamp,
            )
            self._commit(
                "ProcessMigrated",
                {
                    "process_id": process.process_id,
                    "from_version": session.base_version,
                    "to_version": candidate.version,
                },
                timestamp=timestamp,
            )
            self._commit(
                "NegotiationClosed",
                {
                    "session_id": session_id,
                    "ruling": "accepted",
                    "result_version": candidate.version,
                    "tally": dict(probe.tally),
                },
                timestamp=timestamp,
            )
            return {
                "ruling": "accepted",
                "tally": dict(probe.tally),
                "result_version": candidate.version,
                "accepted_proposal_id": probe.accepted_proposal_id,
            }

    def record_session_history(self, session_id: str, consents: Mapping[str, bool]) -> dict:
        with self.lock:
            session = self._session(session_id)
            if session_id in self.state.repository.history:
                raise EngineError("ALREADY_RECORDED", f"session {session_id!r} already has an immutable record")
            record = record_history(session, consents, now=self.clock())
            self._commit("HistoryRecorded", {"session_id": session_id, "record": record_to_doc(record)})
            return record_to_doc(record)

    # -- propagation and catalog ------------------------------------------

    def propagate(self, version: str, strategy: Union[str, PropagationStrategy], actor: Optional[str] = None) -> dict:
        try:
            strategy = PropagationStrategy(strategy)
        except ValueError:
            raise EngineError("SCHEMA_INVALID", f"unknown propagation strategy {strategy!r}") from None
        if self.propagation_guard is not None and not self.propagation_guard(actor or "", strategy):
            raise EngineError("FORBIDDEN", f"propagation as {strategy.value} not authorized")
        with self.lock:
            timestamp = self.clock()
            # Dry-run on a full copy; an aborted instant propagation must leave zero trace.
            report = propagate_op(copy.deepcopy(self.state), version, strategy, now=timestamp)
            if not report.applied:
                return report.to_dict()
            if strategy is PropagationStrategy.INSTANT:
                for pid in report.migrated:
                    self._commit(
                        "ProcessMigrated",
                        {"process_id": pid, "from_version": report.replaced_version, "to_version": version},
                        timestamp=timestamp,
                    )
                for sid in report.withdrawn_sessions:
                    self._commit(
                        "NegotiationClosed",
                        {"session_id": sid, "ruling": "withdrawn", "result_version": None},
                        timestamp=timestamp,
                    )
            self._commit("Propagated", {"report": report.to_dict()}, timestamp=timestamp)
            return report.to_dict()

    def catalog(self, group_id: str) -> list[dict]:
        with self.lock:
            return [entry.to_dict() for entry in catalog_for(self.state, group_id)]

    def adopt(
        self,
        version: str,
        group_id: str,
        action_choices: Optional[Mapping[str, str]] = None,
        role_bindings: Iterable[Mapping] = (),
    ) -> dict:
        bindings = [RoleBinding(role=d["role"], collaborators=frozenset(d["collaborators"])) for d in role_bindings]
        with self.lock:
            group = self.state.groups.get(group_id)
            if group is None:
                raise EngineError("UNKNOWN_GROUP", f"no group {group_id!r}")
            if group.environment_ref is None or group.environment_ref not in self.state.environments:
                raise EngineError("UNKNOWN_ENVIRONMENT", f"group {group_id!r} has no registered environment")
            env = self.state.environments[group.environment_ref]
            result = adopt_cross_environment(
                self.state.repository, version, env, action_choices=action_choices, role_bindings=bindings
            )
            if not result.adopted:
                return {"adopted": False, "missing_actions": sorted(result.missing_actions), "version": None}
            new_version = self.register_protocol(result.candidate, PrivateScope(group_id=group_id))
            return {"adopted": True, "missing_actions": [], "version": new_version}

    def lineage_of(self, version: str) -> list[dict]:
        with self.lock:
            return [
                {"version": hop.version, "parent": hop.parent, "negotiation_ref": hop.negotiation_ref}
                for hop in lineage(self.state.repository, version)
            ]

    def history_of(self, version: str, group_id: str) -> list[dict]:
        with self.lock:
            return query_history(self.state.repository, version, group_id)

    # -- introspection -----------------------------------------------------

    def events_since(self, seq: int) -> list[dict]:
        with self.lock:
            return [record.to_doc() for record in self.log.since(seq)]

    def state_doc(self) -> dict:
        with self.lock:
            return state_to_doc(self.state)

    def serialize(self) -> str:
        with self.lock:
            return serialize_state(self.state)

    def list_protocols(self) -> list[dict]:
        with self.lock:
            return [self.protocol_view(v) for v in sorted(self.state.repository.versions)]

    def list_processes(self) -> list[dict]:
        with self.lock:
            return [self.process_view(pid) for pid in sorted(self.state.processes)]

    def list_groups(self) -> list[dict]:
        with self.lock:
            return [group_to_doc(self.state.groups[gid]) for gid in sorted(self.state.groups)]

    def list_environments(self) -> list[dict]:
        with self.lock:
            return [environment_to_doc(self.state.environments[eid]) for eid in sorted(self.state.environments)]

    def list_sessions(self) -> list[dict]:
        with self.lock:
            return [session_to_doc(self.state.sessions[sid]) for sid in sorted(self.state.sessions)]
