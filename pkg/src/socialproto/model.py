"""Protocol value model: role-gated finite state machines at three refinement levels.

A social protocol is an immutable, content-addressed value. Everything here is
a pure function: validation, refinement classification, binding (implement),
abstraction extraction, patching, diffing, and environment compatibility.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union
from urllib.parse import urlsplit

from .errors import EngineError

RoleName = str


class StateKind(str, Enum):
    START = "start"
    INTERMEDIATE = "intermediate"
    END = "end"


class RefinementLevel(str, Enum):
    ABSTRACT = "abstract"
    SEMI_IMPLEMENTED = "semi_implemented"
    IMPLEMENTED = "implemented"


@dataclass(frozen=True)
class StateNode:
    """One FSM state. ``outcome`` labels end states (e.g. "success", "failure")."""

    id: str
    kind: StateKind
    label: str = ""
    outcome: Optional[str] = None


@dataclass(frozen=True)
class ActionSpec:
    """Abstract action name plus, once implemented, the endpoint URI it runs at."""

    name: str
    binding: Optional[str] = None


@dataclass(frozen=True)
class Transition:
    id: str
    from_state: str
    to_state: str
    role: RoleName
    action: ActionSpec


@dataclass(frozen=True)
class RoleBinding:
    role: RoleName
    collaborators: frozenset[str]


@dataclass(frozen=True)
class SocialProtocol:
    """Versioned FSM value. Construct via :func:`make_protocol` so collections are
    canonically ordered and the version id is the content hash."""

    protocol_id: str
    version: str
    states: tuple[StateNode, ...]
    transitions: tuple[Transition, ...]
    roles: frozenset[RoleName]
    role_bindings: tuple[RoleBinding, ...]
    parent_version: Optional[str] = None

    def state_ids(self) -> set[str]:
        return {s.id for s in self.states}

    def start_ids(self) -> set[str]:
        return {s.id for s in self.states if s.kind is StateKind.START}

    def end_ids(self) -> set[str]:
        return {s.id for s in self.states if s.kind is StateKind.END}

    def state(self, state_id: str) -> StateNode:
        for s in self.states:
            if s.id == state_id:
                return s
        raise EngineError("UNKNOWN_STATE", f"no state {state_id!r} in protocol")

    def transition(self, transition_id: str) -> Transition:
        for t in self.transitions:
            if t.id == transition_id:
                return t
        raise EngineError("UNKNOWN_TRANSITION", f"no transition {transition_id!r} in protocol")

    def transitions_from(self, state_id: str) -> list[Transition]:
        return [t for t in self.transitions if t.from_state == state_id]

    def action_names(self) -> set[str]:
        return {t.action.name for t in self.transitions}


@dataclass(frozen=True)
class Environment:
    """A group's registry of available service endpoints per abstract action name."""

    env_id: str
    services: Mapping[str, frozenset[str]]

    def __post_init__(self) -> None:
        for name, endpoints in self.services.items():
            if not endpoints:
                raise EngineError("INVALID_ENVIRONMENT", f"action {name!r} has an empty endpoint set")


# ---------------------------------------------------------------------------
# Patch edit vocabulary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AddState:
    state: StateNode


@dataclass(frozen=True)
class RemoveState:
    state_id: str


@dataclass(frozen=True)
class AddTransition:
    transition: Transition


@dataclass(frozen=True)
class RemoveTransition:
    transition_id: str


@dataclass(frozen=True)
class BindAction:
    transition_id: str
    uri: str


@dataclass(frozen=True)
class UnbindAction:
    transition_id: str


@dataclass(frozen=True)
class BindRole:
    role: RoleName
    collaborators: frozenset[str]


@dataclass(frozen=True)
class UnbindRole:
    role: RoleName


Edit = Union[AddState, RemoveState, AddTransition, RemoveTransition, BindAction, UnbindAction, BindRole, UnbindRole]


@dataclass(frozen=True)
class ProtocolPatch:
    """Ordered edit list. Must be non-empty; edits apply strictly in order."""

    edits: tuple[Edit, ...]

    def __post_init__(self) -> None:
        if not self.edits:
            raise EngineError("EMPTY_PATCH", "a patch must contain at least one edit")


def patch(*edits: Edit) -> ProtocolPatch:
    return ProtocolPatch(edits=tuple(edits))


# ---------------------------------------------------------------------------
# Validation report
# ---------------------------------------------------------------------------


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Finding:
    severity: Severity
    code: str
    message: str
    subject: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def valid(self) -> bool:
        return not any(f.severity is Severity.ERROR for f in self.findings)

    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.ERROR]

    def warnings(self) -> list[Finding]:
        return [f for f in self.findings if f.severity is Severity.WARNING]

    def codes(self) -> set[str]:
        return {f.code for f in self.findings}

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "findings": [
                {"severity": f.severity.value, "code": f.code, "message": f.message, "subject": f.subject}
                for f in self.findings
            ],
        }


# ---------------------------------------------------------------------------
# Construction and canonical form
# ---------------------------------------------------------------------------


def _transition_sort_key(t: Transition) -> tuple:
    return (t.from_state, t.to_state, t.role, t.action.name, t.action.binding or "", t.id)


def make_protocol(
    protocol_id: str,
    states: Iterable[StateNode],
    transitions: Iterable[Transition],
    roles: Iterable[RoleName] = (),
    role_bindings: Iterable[RoleBinding] = (),
    parent_version: Optional[str] = None,
) -> SocialProtocol:
    """Build a protocol value with canonical ordering and a content-hash version id."""
    p = SocialProtocol(
        protocol_id=protocol_id,
        version="",
        states=tuple(sorted(states, key=lambda s: s.id)),
        transitions=tuple(sorted(transitions, key=_transition_sort_key)),
        roles=frozenset(roles),
        role_bindings=tuple(sorted(role_bindings, key=lambda rb: rb.role)),
        parent_version=parent_version,
    )
    return replace(p, version=compute_version(p))


def canonical_json(obj) -> str:
    """Canonical serialization: sorted keys, compact separators, no ASCII escaping."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def protocol_to_doc(protocol: SocialProtocol, include_version: bool = True) -> dict:
    doc = {
        "protocol_id": protocol.protocol_id,
        "parent_version": protocol.parent_version,
        "states": [
            {"id": s.id, "kind": s.kind.value, "label": s.label, "outcome": s.outcome}
            for s in sorted(protocol.states, key=lambda s: s.id)
        ],
        "transitions": [
            {
                "id": t.id,
                "from": t.from_state,
                "to": t.to_state,
                "role": t.role,
                "action": {"name": t.action.name, "binding": t.action.binding},
            }
            for t in sorted(protocol.transitions, key=_transition_sort_key)
        ],
        "roles": sorted(protocol.roles),
        "role_bindings": [
            {"role": rb.role, "collaborators": sorted(rb.collaborators)}
            for rb in sorted(protocol.role_bindings, key=lambda rb: rb.role)
        ],
    }
    if include_version:
        doc["version"] = protocol.version
    return doc


def compute_version(protocol: SocialProtocol) -> str:
    """Content-addressed version id: hash of the canonical doc minus the version field."""
    return sha256_hex(canonical_json(protocol_to_doc(protocol, include_version=False)))[:16]


def protocol_from_doc(doc: Mapping) -> SocialProtocol:
    states = [
        StateNode(id=s["id"], kind=StateKind(s["kind"]), label=s.get("label", ""), outcome=s.get("outcome"))
        for s in doc["states"]
    ]
    transitions = [
        Transition(
            id=t["id"],
            from_state=t["from"],
            to_state=t["to"],
            role=t["role"],
            action=ActionSpec(name=t["action"]["name"], binding=t["action"].get("binding")),
        )
        for t in doc["transitions"]
    ]
    role_bindings = [
        RoleBinding(role=rb["role"], collaborators=frozenset(rb["collaborators"]))
        for rb in doc.get("role_bindings", [])
    ]
    protocol = make_protocol(
        protocol_id=doc["protocol_id"],
        states=states,
        transitions=transitions,
        roles=doc.get("roles", []),
        role_bindings=role_bindings,
        parent_version=doc.get("parent_version"),
    )
    stated = doc.get("version")
    if stated and stated != protocol.version:
        raise EngineError(
            "VERSION_MISMATCH",
            f"document claims version {stated} but content hashes to {protocol.version}",
        )
    return protocol


def dump_protocol(protocol: SocialProtocol, path: Union[str, Path]) -> None:
    Path(path).write_text(canonical_json(protocol_to_doc(protocol)) + "\n", encoding="utf-8")


def load_protocol(path: Union[str, Path]) -> SocialProtocol:
    return protocol_from_doc(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Structural equality
# ---------------------------------------------------------------------------


def structural_key(protocol: SocialProtocol) -> tuple:
    """Canonical structural identity: ignores protocol id, version ids, display labels
    and transition ids, but keeps kinds, outcomes, roles and all bindings."""
    states = tuple(sorted((s.id, s.kind.value, s.outcome) for s in protocol.states))
    transitions = tuple(
        sorted((t.from_state, t.to_state, t.role, t.action.name, t.action.binding) for t in protocol.transitions)
    )
    roles = tuple(sorted(protocol.roles))
    bindings = tuple(sorted((rb.role, tuple(sorted(rb.collaborators))) for rb in protocol.role_bindings))
    return (states, transitions, roles, bindings)


def structurally_equal(a: SocialProtocol, b: SocialProtocol) -> bool:
    return structural_key(a) == structural_key(b)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def reachable_from(starts: set[str], transitions: Iterable[Transition], states: set[str]) -> set[str]:
    """Forward BFS over the transition graph, restricted to known states."""
    seen = set(s for s in starts if s in states)
    frontier = list(seen)
    adj: dict[str, list[str]] = {}
    for t in transitions:
        if t.from_state in states and t.to_state in states:
            adj.setdefault(t.from_state, []).append(t.to_state)
    while frontier:
        here = frontier.pop()
        for nxt in adj.get(here, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def coreachable_to(ends: set[str], transitions: Iterable[Transition], states: set[str]) -> set[str]:
    """Reverse BFS: states from which some end state is reachable."""
    reversed_ts = [
        Transition(id=t.id, from_state=t.to_state, to_state=t.from_state, role=t.role, action=t.action)
        for t in transitions
    ]
    return reachable_from(ends, reversed_ts, states)


def validate_structure(protocol: SocialProtocol) -> ValidationReport:
    """Structural validation. Problems are report findings, never exceptions."""
    findings: list[Finding] = []

    def err(code: str, message: str, subject: str) -> None:
        findings.append(Finding(Severity.ERROR, code, message, subject))

    def warn(code: str, message: str, subject: str) -> None:
        findings.append(Finding(Severity.WARNING, code, message, subject))

    seen_state_ids: set[str] = set()
    for s in sorted(protocol.states, key=lambda s: s.id):
        if s.id in seen_state_ids:
            err("DUPLICATE_ID", f"state id {s.id!r} declared more than once", s.id)
        seen_state_ids.add(s.id)
    seen_transition_ids: set[str] = set()
    for t in sorted(protocol.transitions, key=_transition_sort_key):
        if t.id in seen_transition_ids:
            err("DUPLICATE_ID", f"transition id {t.id!r} declared more than once", t.id)
        seen_transition_ids.add(t.id)

    state_ids = protocol.state_ids()
    start_ids = protocol.start_ids()
    end_ids = protocol.end_ids()

    if not start_ids:
        err("NO_START_STATE", "protocol has no start state", protocol.protocol_id)
    if not end_ids:
        err("NO_END_STATE", "protocol has no end state", protocol.protocol_id)
    for sid in sorted(start_ids & end_ids):
        err("START_END_OVERLAP", f"state {sid!r} is both a start and an end state", sid)

    for t in sorted(protocol.transitions, key=_transition_sort_key):
        for endpoint in (t.from_state, t.to_state):
            if endpoint not in state_ids:
                err("DANGLING_TRANSITION", f"transition {t.id!r} references missing state {endpoint!r}", t.id)
        if t.from_state in end_ids:
            err("END_STATE_EXIT", f"transition {t.id!r} leaves end state {t.from_state!r}", t.id)
        if t.role not in protocol.roles:
            err("UNDECLARED_ROLE", f"transition {t.id!r} requires undeclared role {t.role!r}", t.id)

    reachable = reachable_from(start_ids, protocol.transitions, state_ids)
    coreachable = coreachable_to(end_ids, protocol.transitions, state_ids)
    for sid in sorted(state_ids):
        if sid not in reachable:
            err("UNREACHABLE_STATE", f"state {sid!r} is unreachable from every start state", sid)
        elif sid not in coreachable:
            err("NO_PATH_TO_END", f"no end state is reachable from state {sid!r}", sid)

    used_roles = {t.role for t in protocol.transitions}
    for role in sorted(protocol.roles - used_roles):
        warn("UNUSED_ROLE", f"role {role!r} is declared but gates no transition", role)

    bindings_by_action: dict[str, set[str]] = {}
    for t in protocol.transitions:
        if t.action.binding is not None:
            bindings_by_action.setdefault(t.action.name, set()).add(t.action.binding)
    for name in sorted(bindings_by_action):
        if len(bindings_by_action[name]) > 1:
            warn(
                "INCONSISTENT_ACTION_BINDING",
                f"action {name!r} is bound to {len(bindings_by_action[name])} different URIs",
                name,
            )

    return ValidationReport(findings=tuple(findings))


# ---------------------------------------------------------------------------
# Refinement ladder
# ---------------------------------------------------------------------------


def refinement_level(protocol: SocialProtocol) -> RefinementLevel:
    """Classify a valid protocol as abstract, semi-implemented or implemented."""
    if not validate_structure(protocol).valid:
        raise EngineError("INVALID_PROTOCOL", "refinement level is defined only for valid protocols")
    bound_roles = {rb.role for rb in protocol.role_bindings if rb.collaborators}
    all_actions_bound = all(t.action.binding is not None for t in protocol.transitions)
    all_roles_bound = protocol.roles <= bound_roles
    if all_actions_bound and all_roles_bound:
        return RefinementLevel.IMPLEMENTED
    no_action_bindings = all(t.action.binding is None for t in protocol.transitions)
    if no_action_bindings and not protocol.role_bindings:
        return RefinementLevel.ABSTRACT
    return RefinementLevel.SEMI_IMPLEMENTED


def _require_valid_uri(uri: str) -> None:
    parts = urlsplit(uri)
    if not parts.scheme or any(c.isspace() for c in uri):
        raise EngineError("INVALID_URI", f"{uri!r} is not an absolute URI")


def implement(
    protocol: SocialProtocol,
    role_bindings: Iterable[RoleBinding] = (),
    action_bindings: Mapping[str, str] | None = None,
) -> SocialProtocol:
    """Merge role and action bindings into a new protocol value.

    ``action_bindings`` maps transition ids to endpoint URIs. The input value is
    never mutated; a no-op call returns it unchanged.
    """
    role_bindings = tuple(role_bindings)
    action_bindings = dict(action_bindings or {})
    if not role_bindings and not action_bindings:
        return protocol

    declared = protocol.roles
    for rb in role_bindings:
        if rb.role not in declared:
            raise EngineError("UNKNOWN_ROLE", f"role {rb.role!r} is not declared by the protocol")
    transition_ids = {t.id for t in protocol.transitions}
    for tid, uri in action_bindings.items():
        if tid not in transition_ids:
            raise EngineError("UNKNOWN_TRANSITION", f"no transition {tid!r} to bind")
        _require_valid_uri(uri)

    merged_rb = {rb.role: rb for rb in protocol.role_bindings}
    for rb in role_bindings:
        merged_rb[rb.role] = rb
    new_transitions = [
        replace(t, action=replace(t.action, binding=action_bindings[t.id])) if t.id in action_bindings else t
        for t in protocol.transitions
    ]
    return make_protocol(
        protocol_id=protocol.protocol_id,
        states=protocol.states,
        transitions=new_transitions,
        roles=protocol.roles,
        role_bindings=merged_rb.values(),
        parent_version=protocol.version,
    )


def extract_abstract(protocol: SocialProtocol) -> SocialProtocol:
    """Strip every binding, keeping states, transitions and roles intact."""
    if all(t.action.binding is None for t in protocol.transitions) and not protocol.role_bindings:
        return protocol
    return make_protocol(
        protocol_id=protocol.protocol_id,
        states=protocol.states,
        transitions=[replace(t, action=ActionSpec(name=t.action.name)) for t in protocol.transitions],
        roles=protocol.roles,
        role_bindings=(),
        parent_version=protocol.version,
    )


# ---------------------------------------------------------------------------
# Patching
# ---------------------------------------------------------------------------


@dataclass
class _PatchWork:
    states: dict[str, StateNode]
    transitions: dict[str, Transition]
    roles: set[RoleName]
    role_bindings: dict[RoleName, RoleBinding]
    removed_states: set[str] = field(default_factory=set)
    removed_transitions: set[str] = field(default_factory=set)

    def prune_role(self, role: RoleName) -> None:
        # A role stays declared while some transition uses it or a binding names it.
        if role in self.roles and role not in self.role_bindings:
            if all(t.role != role for t in self.transitions.values()):
                self.roles.discard(role)


def apply_patch(protocol: SocialProtocol, edit_list: ProtocolPatch) -> SocialProtocol:
    """Apply edits in order, returning a new version parented on the input.

    The result is not validated here; callers run :func:`validate_structure` on it.
    The edit vocabulary has no explicit role declarations, so the declared role
    set tracks usage: adding a transition or role binding declares its role, and
    removals prune roles left unused and unbound.
    """
    work = _PatchWork(
        states={s.id: s for s in protocol.states},
        transitions={t.id: t for t in protocol.transitions},
        roles=set(protocol.roles),
        role_bindings={rb.role: rb for rb in protocol.role_bindings},
    )

    for edit in edit_list.edits:
        if isinstance(edit, AddState):
            if edit.state.id in work.states:
                raise EngineError("DUPLICATE_ID", f"state {edit.state.id!r} already exists")
            work.states[edit.state.id] = edit.state
            work.removed_states.discard(edit.state.id)
        elif isinstance(edit, RemoveState):
            if edit.state_id not in work.states:
                raise EngineError("PATCH_TARGET_MISSING", f"no state {edit.state_id!r} to remove")
            del work.states[edit.state_id]
            work.removed_states.add(edit.state_id)
        elif isinstance(edit, AddTransition):
            t = edit.transition
            if t.id in work.transitions:
                raise EngineError("DUPLICATE_ID", f"transition {t.id!r} already exists")
            for endpoint in (t.from_state, t.to_state):
                if endpoint in work.removed_states:
                    raise EngineError(
                        "PATCH_TARGET_MISSING",
                        f"transition {t.id!r} references state {endpoint!r} removed by an earlier edit",
                    )
            work.transitions[t.id] = t
            work.removed_transitions.discard(t.id)
            work.roles.add(t.role)
        elif isinstance(edit, RemoveTransition):
            if edit.transition_id not in work.transitions:
                raise EngineError("PATCH_TARGET_MISSING", f"no transition {edit.transition_id!r} to remove")
            role = work.transitions[edit.transition_id].role
            del work.transitions[edit.transition_id]
            work.removed_transitions.add(edit.transition_id)
            work.prune_role(role)
        elif isinstance(edit, BindAction):
            if edit.transition_id not in work.transitions:
                raise EngineError("PATCH_TARGET_MISSING", f"no transition {edit.transition_id!r} to bind")
            _require_valid_uri(edit.uri)
            t = work.transitions[edit.transition_id]
            work.transitions[t.id] = replace(t, action=replace(t.action, binding=edit.uri))
        elif isinstance(edit, UnbindAction):
            if edit.transition_id not in work.transitions:
                raise EngineError("PATCH_TARGET_MISSING", f"no transition {edit.transition_id!r} to unbind")
            t = work.transitions[edit.transition_id]
            work.transitions[t.id] = replace(t, action=ActionSpec(name=t.action.name))
        elif isinstance(edit, BindRole):
            work.roles.add(edit.role)
            work.role_bindings[edit.role] = RoleBinding(role=edit.role, collaborators=frozenset(edit.collaborators))
        elif isinstance(edit, UnbindRole):
            if edit.role not in work.role_bindings:
                raise EngineError("PATCH_TARGET_MISSING", f"role {edit.role!r} has no binding to remove")
            del work.role_bindings[edit.role]
            work.prune_role(edit.role)
        else:  # pragma: no cover - exhaustive over the Edit union
            raise EngineError("INVALID_PATCH", f"unknown edit {edit!r}")

    return make_protocol(
        protocol_id=protocol.protocol_id,
        states=work.states.values(),
        transitions=work.transitions.values(),
        roles=work.roles,
        role_bindings=work.role_bindings.values(),
        parent_version=protocol.version,
    )


def diff(old: SocialProtocol, new: SocialProtocol) -> Optional[ProtocolPatch]:
    """Compute a patch turning ``old`` into a protocol structurally equal to ``new``.

    Returns None when the two are already structurally equal (patches may not be
    empty). Declared-but-unused, unbound roles have no edit vocabulary and are
    assumed synchronized with usage, which every construction path here maintains.
    """
    if structurally_equal(old, new):
        return None

    old_states = {s.id: s for s in old.states}
    new_states = {s.id: s for s in new.states}
    removed_state_ids = sorted(set(old_states) - set(new_states))
    added_state_ids = sorted(set(new_states) - set(old_states))
    changed_state_ids = sorted(
        sid
        for sid in set(old_states) & set(new_states)
        if (old_states[sid].kind, old_states[sid].outcome) != (new_states[sid].kind, new_states[sid].outcome)
    )

    def structural(t: Transition) -> tuple:
        return (t.from_state, t.to_state, t.role, t.action.name)

    old_by_key: dict[tuple, list[Transition]] = {}
    for t in old.transitions:
        old_by_key.setdefault(structural(t), []).append(t)
    new_by_key: dict[tuple, list[Transition]] = {}
    for t in new.transitions:
        new_by_key.setdefault(structural(t), []).append(t)

    removals: list[Transition] = []
    additions: list[Transition] = []
    rebinds: list[tuple[Transition, Optional[str]]] = []
    for key in sorted(set(old_by_key) | set(new_by_key)):
        olds = sorted(old_by_key.get(key, []), key=lambda t: (t.action.binding or "", t.id))
        news = sorted(new_by_key.get(key, []), key=lambda t: (t.action.binding or "", t.id))
        # Exact matches (same binding) drop out without an edit.
        leftover_new = list(news)
        leftover_old = []
        for t in olds:
            match = next((n for n in leftover_new if n.action.binding == t.action.binding), None)
            if match is not None:
                leftover_new.remove(match)
            else:
                leftover_old.append(t)
        while leftover_old and leftover_new:
            rebinds.append((leftover_old.pop(0), leftover_new.pop(0).action.binding))
        removals.extend(leftover_old)
        additions.extend(leftover_new)

    old_rb = {rb.role: rb for rb in old.role_bindings}
    new_rb = {rb.role: rb for rb in new.role_bindings}

    edits: list[Edit] = []
    edits.extend(RemoveTransition(t.id) for t in sorted(removals, key=lambda t: t.id))
    edits.extend(RemoveState(sid) for sid in removed_state_ids)
    for sid in changed_state_ids:
        edits.append(RemoveState(sid))
        edits.append(AddState(new_states[sid]))
    edits.extend(AddState(new_states[sid]) for sid in added_state_ids)
    # Added transitions carry ids from ``new``, which may clash with surviving
    # ids from ``old``; structural equality ignores transition ids, so clashes
    # are renamed instead of removed-and-readded.
    occupied = {t.id for t in old.transitions} - {t.id for t in removals}
    for t in sorted(additions, key=_transition_sort_key):
        tid = t.id
        suffix = 2
        while tid in occupied:
            tid = f"{t.id}~{suffix}"
            suffix += 1
        occupied.add(tid)
        edits.append(AddTransition(t if tid == t.id else replace(t, id=tid)))
    for t, binding in sorted(rebinds, key=lambda pair: pair[0].id):
        if binding is None:
            edits.append(UnbindAction(t.id))
        else:
            edits.append(BindAction(t.id, binding))
    for role in sorted(set(old_rb) - set(new_rb)):
        edits.append(UnbindRole(role))
    for role in sorted(new_rb):
        if role not in old_rb or old_rb[role].collaborators != new_rb[role].collaborators:
            edits.append(BindRole(role, new_rb[role].collaborators))

    if not edits:
        return None
    return ProtocolPatch(edits=tuple(edits))


# ---------------------------------------------------------------------------
# Environment compatibility
# ---------------------------------------------------------------------------


def check_environment_compatibility(protocol: SocialProtocol, env: Environment) -> tuple[bool, frozenset[str]]:
    """An environment is compatible when it offers an endpoint for every action
    name the protocol uses. Names match case-sensitively."""
    missing = frozenset(name for name in protocol.action_names() if name not in env.services)
    return (not missing, missing)


# ---------------------------------------------------------------------------
# Patch (de)serialization: patches travel in events, API bodies and scripts
# ---------------------------------------------------------------------------


def _state_to_doc(s: StateNode) -> dict:
    return {"id": s.id, "kind": s.kind.value, "label": s.label, "outcome": s.outcome}


def _state_from_doc(doc: Mapping) -> StateNode:
    return StateNode(id=doc["id"], kind=StateKind(doc["kind"]), label=doc.get("label", ""), outcome=doc.get("outcome"))


def _transition_to_doc(t: Transition) -> dict:
    return {
        "id": t.id,
        "from": t.from_state,
        "to": t.to_state,
        "role": t.role,
        "action": {"name": t.action.name, "binding": t.action.binding},
    }


def _transition_from_doc(doc: Mapping) -> Transition:
    return Transition(
        id=doc["id"],
        from_state=doc["from"],
        to_state=doc["to"],
        role=doc["role"],
        action=ActionSpec(name=doc["action"]["name"], binding=doc["action"].get("binding")),
    )


def edit_to_doc(edit: Edit) -> dict:
    if isinstance(edit, AddState):
        return {"op": "add_state", "state": _state_to_doc(edit.state)}
    if isinstance(edit, RemoveState):
        return {"op": "remove_state", "state_id": edit.state_id}
    if isinstance(edit, AddTransition):
        return {"op": "add_transition", "transition": _transition_to_doc(edit.transition)}
    if isinstance(edit, RemoveTransition):
        return {"op": "remove_transition", "transition_id": edit.transition_id}
    if isinstance(edit, BindAction):
        return {"op": "bind_action", "transition_id": edit.transition_id, "uri": edit.uri}
    if isinstance(edit, UnbindAction):
        return {"op": "unbind_action", "transition_id": edit.transition_id}
    if isinstance(edit, BindRole):
        return {"op": "bind_role", "role": edit.role, "collaborators": sorted(edit.collaborators)}
    if isinstance(edit, UnbindRole):
        return {"op": "unbind_role", "role": edit.role}
    raise EngineError("INVALID_PATCH", f"unknown edit {edit!r}")


def edit_from_doc(doc: Mapping) -> Edit:
    op = doc.get("op")
    if op == "add_state":
        return AddState(_state_from_doc(doc["state"]))
    if op == "remove_state":
        return RemoveState(doc["state_id"])
    if op == "add_transition":
        return AddTransition(_transition_from_doc(doc["transition"]))
    if op == "remove_transition":
        return RemoveTransition(doc["transition_id"])
    if op == "bind_action":
        return BindAction(doc["transition_id"], doc["uri"])
    if op == "unbind_action":
        return UnbindAction(doc["transition_id"])
    if op == "bind_role":
        return BindRole(doc["role"], frozenset(doc["collaborators"]))
    if op == "unbind_role":
        return UnbindRole(doc["role"])
    raise EngineError("INVALID_PATCH", f"unknown edit op {op!r}")


def patch_to_doc(p: ProtocolPatch) -> list[dict]:
    return [edit_to_doc(e) for e in p.edits]


def patch_from_doc(doc: Iterable[Mapping]) -> ProtocolPatch:
    return ProtocolPatch(edits=tuple(edit_from_doc(e) for e in doc))
