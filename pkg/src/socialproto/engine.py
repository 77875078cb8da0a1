"""Process engine: runs groups of collaborators through a protocol's state machine.

A process stores the ruling protocol by version id only; every operation takes
the resolved protocol value explicitly so the engine stays storage-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Optional, Protocol, Sequence

from .errors import EngineError
from .model import (
    RefinementLevel,
    SocialProtocol,
    StateKind,
    Transition,
    coreachable_to,
    refinement_level,
)


@dataclass(frozen=True)
class Collaborator:
    id: str
    name: str = ""


@dataclass(frozen=True)
class Group:
    """Members with their role assignments, plus the environment the group works in."""

    group_id: str
    members: Mapping[str, frozenset[str]]
    environment_ref: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", {cid: frozenset(roles) for cid, roles in self.members.items()})

    def roles_of(self, collaborator_id: str) -> frozenset[str]:
        return self.members.get(collaborator_id, frozenset())

    def role_seats(self) -> set[tuple[str, str]]:
        return {(cid, role) for cid, roles in self.members.items() for role in roles}


class ProcessStatus(str, Enum):
    RUNNING = "running"
    COMPLETED = "completed"


class EventKind(str, Enum):
    STEP = "step"
    FAILURE = "failure"
    MIGRATION = "migration"


@dataclass(frozen=True)
class ActionResult:
    ok: bool
    payload: Any = None
    error: Optional[str] = None


@dataclass(frozen=True)
class TransitionEvent:
    """One history entry. Failures keep the state unchanged; migrations record a
    protocol version change instead of a transition."""

    seq: int
    kind: EventKind
    transition_id: Optional[str]
    actor: Optional[str]
    from_state: str
    to_state: str
    action_result: Any
    timestamp: str


@dataclass
class SocialProcess:
    """A running instance of a protocol. ``superseded`` marks processes retired in
    favour of split or merged successors; their status stays whatever it was."""

    process_id: str
    protocol_version: str
    group: Group
    current_state: str
    status: ProcessStatus = ProcessStatus.RUNNING
    history: list[TransitionEvent] = field(default_factory=list)
    superseded: bool = False

    @property
    def is_active(self) -> bool:
        return self.status is ProcessStatus.RUNNING and not self.superseded

    def next_seq(self) -> int:
        return self.history[-1].seq + 1 if self.history else 1


class ActionExecutor(Protocol):
    def invoke(self, endpoint: str, context: Mapping[str, Any]) -> ActionResult: ...


class MockActionExecutor:
    """Deterministic executor for tests and scenarios. Handlers are registered per
    endpoint URI; unregistered endpoints echo the call."""

    def __init__(self) -> None:
        self._handlers: dict[str, Callable[[Mapping[str, Any]], ActionResult]] = {}
        self.calls: list[tuple[str, dict[str, Any]]] = []

    def register(self, endpoint: str, handler: Callable[[Mapping[str, Any]], ActionResult]) -> None:
        self._handlers[endpoint] = handler

    def fail_endpoint(self, endpoint: str, error: str = "service unavailable") -> None:
        self._handlers[endpoint] = lambda _ctx: ActionResult(ok=False, error=error)

    def restore(self, endpoint: str) -> None:
        self._handlers.pop(endpoint, None)

    def invoke(self, endpoint: str, context: Mapping[str, Any]) -> ActionResult:
        self.calls.append((endpoint, dict(context)))
        handler = self._handlers.get(endpoint)
        if handler is not None:
            return handler(context)
        return ActionResult(ok=True, payload={"endpoint": endpoint, "echo": dict(context)})


def _check_membership(protocol: SocialProtocol, group: Group) -> None:
    for cid, roles in group.members.items():
        for role in roles:
            if role not in protocol.roles:
                raise EngineError(
                    "UNKNOWN_ROLE_ASSIGNMENT",
                    f"member {cid!r} holds role {role!r} which the protocol does not declare",
                )


def instantiate(
    protocol: SocialProtocol,
    group: Group,
    *,
    process_id: str,
    start_state: Optional[str] = None,
) -> SocialProcess:
    """Spin up a process for a group. The protocol must be implemented; a start
    state choice is required only when the protocol declares several."""
    if refinement_level(protocol) is not RefinementLevel.IMPLEMENTED:
        raise EngineError("NOT_IMPLEMENTED_PROTOCOL", "only fully implemented protocols can be instantiated")
    _check_membership(protocol, group)
    starts = sorted(protocol.start_ids())
    if start_state is None:
        if len(starts) > 1:
            raise EngineError("AMBIGUOUS_START", f"protocol has {len(starts)} start states; one must be chosen")
        start_state = starts[0]
    elif start_state not in starts:
        raise EngineError("UNKNOWN_STATE", f"{start_state!r} is not a start state")
    return SocialProcess(
        process_id=process_id,
        protocol_version=protocol.version,
        group=group,
        current_state=start_state,
    )


def available_transitions(
    process: SocialProcess, protocol: SocialProtocol, collaborator_id: str
) -> list[Transition]:
    """Transitions leaving the current state that this collaborator's roles enable.
    Empty for completed or retired processes."""
    if collaborator_id not in process.group.members:
        raise EngineError("UNKNOWN_COLLABORATOR", f"{collaborator_id!r} is not in the process group")
    if not process.is_active:
        return []
    roles = process.group.roles_of(collaborator_id)
    return [t for t in protocol.transitions_from(process.current_state) if t.role in roles]


def plan_trigger(
    process: SocialProcess,
    protocol: SocialProtocol,
    collaborator_id: str,
    transition_id: str,
    *,
    executor: ActionExecutor,
    now: str,
) -> TransitionEvent:
    """Run every gate check and invoke the bound action, without touching the
    process. Returns the step or failure event to commit; raises on gate errors."""
    if process.superseded:
        raise EngineError("PROCESS_RETIRED", f"process {process.process_id!r} was retired by a split or merge")
    if process.status is ProcessStatus.COMPLETED:
        raise EngineError("PROCESS_COMPLETED", f"process {process.process_id!r} has already completed")
    transition = protocol.transition(transition_id)
    if transition.from_state != process.current_state:
        raise EngineError(
            "WRONG_SOURCE_STATE",
            f"transition {transition_id!r} leaves {transition.from_state!r} but the process is at "
            f"{process.current_state!r}",
        )
    if collaborator_id not in process.group.members:
        raise EngineError("UNKNOWN_COLLABORATOR", f"{collaborator_id!r} is not a member of the group")
    if transition.role not in process.group.roles_of(collaborator_id):
        raise EngineError(
            "ROLE_MISMATCH",
            f"transition {transition_id!r} requires role {transition.role!r}",
            required_role=transition.role,
            actor=collaborator_id,
        )

    context = {
        "process_id": process.process_id,
        "transition_id": transition.id,
        "action": transition.action.name,
        "actor": collaborator_id,
        "current_state": process.current_state,
    }
    # Implemented protocols always carry a binding; guard anyway.
    endpoint = transition.action.binding or ""
    result = executor.invoke(endpoint, context)

    if not result.ok:
        return TransitionEvent(
            seq=process.next_seq(),
            kind=EventKind.FAILURE,
            transition_id=transition.id,
            actor=collaborator_id,
            from_state=process.current_state,
            to_state=process.current_state,
            action_result={"ok": False, "error": result.error},
            timestamp=now,
        )
    return TransitionEvent(
        seq=process.next_seq(),
        kind=EventKind.STEP,
        transition_id=transition.id,
        actor=collaborator_id,
        from_state=process.current_state,
        to_state=transition.to_state,
        action_result={"ok": True, "payload": result.payload},
        timestamp=now,
    )


def commit_transition_event(process: SocialProcess, protocol: SocialProtocol, event: TransitionEvent) -> None:
    """Apply a planned step or failure event: the only place process state moves."""
    process.history.append(event)
    if event.kind is EventKind.STEP:
        process.current_state = event.to_state
        if protocol.state(event.to_state).kind is StateKind.END:
            process.status = ProcessStatus.COMPLETED


def trigger(
    process: SocialProcess,
    protocol: SocialProtocol,
    collaborator_id: str,
    transition_id: str,
    *,
    executor: ActionExecutor,
    now: str,
) -> TransitionEvent:
    """Fire one transition: gate checks, action invocation, then the state change.

    A failed action appends a failure event, leaves the state alone and raises
    ACTION_FAILED. Only a successful action moves the process.
    """
    event = plan_trigger(process, protocol, collaborator_id, transition_id, executor=executor, now=now)
    commit_transition_event(process, protocol, event)
    if event.kind is EventKind.FAILURE:
        raise EngineError(
            "ACTION_FAILED",
            f"action {protocol.transition(transition_id).action.name!r} failed: "
            f"{event.action_result.get('error')}",
            transition_id=transition_id,
            error=event.action_result.get("error"),
        )
    return event


def outcome(process: SocialProcess, protocol: SocialProtocol) -> Optional[str]:
    """Outcome label of the reached end state, or None while still running.
    End states without an explicit outcome count as "success"."""
    if process.status is not ProcessStatus.COMPLETED:
        return None
    state = protocol.state(process.current_state)
    return state.outcome if state.outcome is not None else "success"


def _subgroup(parent: Group, member_ids: Iterable[str], group_id: str) -> Group:
    return Group(
        group_id=group_id,
        members={cid: parent.members[cid] for cid in member_ids},
        environment_ref=parent.environment_ref,
    )


def split_group(
    process: SocialProcess,
    partition: Sequence[Iterable[str]],
    *,
    child_ids: Sequence[str],
    child_group_ids: Sequence[str],
) -> list[SocialProcess]:
    """Fork an active process into one child per partition cell.

    The partition must cover the members exactly and leave no cell empty. Children
    start at the parent's current state with a copy of its history; the parent is
    retired, not completed.
    """
    if process.superseded:
        raise EngineError("PROCESS_RETIRED", f"process {process.process_id!r} was already retired")
    if process.status is ProcessStatus.COMPLETED:
        raise EngineError("PROCESS_COMPLETED", "cannot split a completed process")
    cells = [set(cell) for cell in partition]
    if len(cells) < 2:
        raise EngineError("INVALID_PARTITION", "a split needs at least two cells")
    if len(child_ids) != len(cells) or len(child_group_ids) != len(cells):
        raise EngineError("INVALID_PARTITION", "one child process and group id per cell required")
    members = set(process.group.members)
    seen: set[str] = set()
    for cell in cells:
        if not cell:
            raise EngineError("INVALID_PARTITION", "empty partition cell")
        unknown = cell - members
        if unknown:
            raise EngineError("INVALID_PARTITION", f"not group members: {sorted(unknown)}")
        overlap = cell & seen
        if overlap:
            raise EngineError("INVALID_PARTITION", f"members in multiple cells: {sorted(overlap)}")
        seen |= cell
    if seen != members:
        raise EngineError("INVALID_PARTITION", f"members missing from partition: {sorted(members - seen)}")

    children = []
    for cell, pid, gid in zip(cells, child_ids, child_group_ids):
        children.append(
            SocialProcess(
                process_id=pid,
                protocol_version=process.protocol_version,
                group=_subgroup(process.group, sorted(cell), gid),
                current_state=process.current_state,
                status=ProcessStatus.RUNNING,
                history=list(process.history),
            )
        )
    process.superseded = True
    return children


def merge_groups(
    processes: Sequence[SocialProcess],
    *,
    process_id: str,
    group_id: str,
) -> SocialProcess:
    """Join two or more sibling processes back into one.

    All inputs must be active, rule the same protocol version and sit in the same
    state. Member role sets are unioned; history is the interleaving of the
    inputs' histories by sequence number, deduplicated on their common prefix.
    """
    if len(processes) < 2:
        raise EngineError("INVALID_PARTITION", "a merge needs at least two processes")
    for p in processes:
        if p.superseded:
            raise EngineError("PROCESS_RETIRED", f"process {p.process_id!r} was retired")
        if p.status is ProcessStatus.COMPLETED:
            raise EngineError("PROCESS_COMPLETED", f"process {p.process_id!r} has completed")
    versions = {p.protocol_version for p in processes}
    if len(versions) > 1:
        raise EngineError("PROTOCOL_MISMATCH", f"processes rule different protocol versions: {sorted(versions)}")
    states = {p.current_state for p in processes}
    if len(states) > 1:
        raise EngineError("STATE_MISMATCH", f"processes are in different states: {sorted(states)}")

    merged_members: dict[str, frozenset[str]] = {}
    for p in processes:
        for cid, roles in p.group.members.items():
            merged_members[cid] = merged_members.get(cid, frozenset()) | roles
    group = Group(
        group_id=group_id,
        members=merged_members,
        environment_ref=processes[0].group.environment_ref,
    )

    seen_events: set[tuple] = set()
    merged_history: list[TransitionEvent] = []
    for event in sorted(
        (e for p in processes for e in p.history),
        key=lambda e: (e.seq, e.timestamp, e.transition_id or "", e.actor or ""),
    ):
        key = (event.seq, event.kind, event.transition_id, event.actor, event.timestamp)
        if key in seen_events:
            continue
        seen_events.add(key)
        merged_history.append(event)
    renumbered = [replace(e, seq=i + 1) for i, e in enumerate(merged_history)]

    merged = SocialProcess(
        process_id=process_id,
        protocol_version=processes[0].protocol_version,
        group=group,
        current_state=processes[0].current_state,
        status=ProcessStatus.RUNNING,
        history=renumbered,
    )
    for p in processes:
        p.superseded = True
    return merged


def migration_conflict(process: SocialProcess, target: SocialProtocol) -> Optional[str]:
    """Why this process cannot move to ``target``, or None if it can.

    Conflicts: the current state no longer exists, or no end state remains
    reachable from it under the target's transition graph.
    """
    state_ids = target.state_ids()
    if process.current_state not in state_ids:
        return f"current state {process.current_state!r} does not exist in the target protocol"
    if process.current_state not in coreachable_to(target.end_ids(), target.transitions, state_ids):
        return f"no end state is reachable from {process.current_state!r} in the target protocol"
    return None


def migrate(process: SocialProcess, target: SocialProtocol, *, now: str) -> Optional[str]:
    """Move a running process onto a new protocol version in place.

    Returns None on success (a migration marker is appended to the history) or
    the conflict description, in which case nothing changes.
    """
    if process.superseded:
        raise EngineError("PROCESS_RETIRED", f"process {process.process_id!r} was retired")
    if process.status is ProcessStatus.COMPLETED:
        raise EngineError("PROCESS_COMPLETED", "completed processes are not migrated")
    # Binding completeness is checked directly rather than via refinement_level:
    # reachability problems in the target must surface as conflict reports, not
    # as validation exceptions.
    bound_roles = {rb.role for rb in target.role_bindings if rb.collaborators}
    if any(t.action.binding is None for t in target.transitions) or not target.roles <= bound_roles:
        raise EngineError("NOT_IMPLEMENTED_PROTOCOL", "processes can only run implemented protocols")
    conflict = migration_conflict(process, target)
    if conflict is not None:
        return conflict
    event = TransitionEvent(
        seq=process.next_seq(),
        kind=EventKind.MIGRATION,
        transition_id=None,
        actor=None,
        from_state=process.current_state,
        to_state=process.current_state,
        action_result={"from_version": process.protocol_version, "to_version": target.version},
        timestamp=now,
    )
    process.history.append(event)
    process.protocol_version = target.version
    return None
