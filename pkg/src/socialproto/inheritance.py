"""Version repository, lineage, propagation strategies and cross-team history.

Adapted protocols start out private to the adapting group. A one-shot
propagation decision either keeps them local, publishes them to the community
catalog for future groups, or replaces the parent version community-wide with
an all-or-nothing migration of every running process.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Union

from .errors import EngineError
from .engine import Group, SocialProcess, migrate, migration_conflict
from .model import (
    Environment,
    ProtocolPatch,
    RefinementLevel,
    RoleBinding,
    SocialProtocol,
    apply_patch,
    check_environment_compatibility,
    extract_abstract,
    implement,
    make_protocol,
    refinement_level,
    validate_structure,
)
from .negotiation import NegotiationRecord, NegotiationSession, SessionStatus, record_view, withdraw


@dataclass(frozen=True)
class PrivateScope:
    group_id: str


@dataclass(frozen=True)
class CatalogScope:
    pass


Scope = Union[PrivateScope, CatalogScope]


class PropagationStrategy(str, Enum):
    LOCAL = "local"
    GLOBAL = "global"
    INSTANT = "instant"


@dataclass(frozen=True)
class LineageEdge:
    child: str
    parent: str
    negotiation_ref: Optional[str] = None


@dataclass
class ProtocolRepository:
    """Community store: every version ever registered, its visibility, lineage
    edges, catalog tombstones for replaced versions, and negotiation records."""

    versions: dict[str, SocialProtocol] = field(default_factory=dict)
    edges: dict[str, LineageEdge] = field(default_factory=dict)  # keyed by child version
    visibility: dict[str, Scope] = field(default_factory=dict)
    tombstones: set[str] = field(default_factory=set)
    history: dict[str, NegotiationRecord] = field(default_factory=dict)  # keyed by session id

    def get(self, version_id: str) -> SocialProtocol:
        try:
            return self.versions[version_id]
        except KeyError:
            raise EngineError("UNKNOWN_VERSION", f"no protocol version {version_id!r}") from None


@dataclass
class PVCState:
    """Whole-community state: groups, processes, environments, open and closed
    negotiation sessions, and the shared protocol repository."""

    groups: dict[str, Group] = field(default_factory=dict)
    processes: dict[str, SocialProcess] = field(default_factory=dict)
    environments: dict[str, Environment] = field(default_factory=dict)
    sessions: dict[str, NegotiationSession] = field(default_factory=dict)
    repository: ProtocolRepository = field(default_factory=ProtocolRepository)


def register_protocol(repo: ProtocolRepository, protocol: SocialProtocol, scope: Scope) -> str:
    """Add a structurally valid protocol to the repository; idempotent for
    identical content because version ids are content hashes."""
    if protocol.version in repo.versions:
        return protocol.version
    report = validate_structure(protocol)
    if not report.valid:
        raise EngineError(
            "INVALID_PROTOCOL",
            "only structurally valid protocols are registered",
            findings=[f.code for f in report.errors()],
        )
    repo.versions[protocol.version] = protocol
    repo.visibility[protocol.version] = scope
    if protocol.parent_version and protocol.parent_version in repo.versions:
        repo.edges.setdefault(protocol.version, LineageEdge(child=protocol.version, parent=protocol.parent_version))
    return protocol.version


def derive_version(
    repo: ProtocolRepository,
    parent_version: str,
    patch: ProtocolPatch,
    *,
    group_id: str,
    negotiation_ref: Optional[str] = None,
) -> SocialProtocol:
    """Apply a patch to a registered parent and register the result privately for
    the deriving group, with a lineage edge naming the negotiation behind it."""
    parent = repo.get(parent_version)
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
    if candidate.version not in repo.versions:
        repo.versions[candidate.version] = candidate
        repo.visibility[candidate.version] = PrivateScope(group_id=group_id)
    repo.edges[candidate.version] = LineageEdge(
        child=candidate.version, parent=parent_version, negotiation_ref=negotiation_ref
    )
    return candidate


@dataclass(frozen=True)
class PropagationReport:
    strategy: PropagationStrategy
    version: str
    replaced_version: Optional[str]
    applied: bool
    migrated: tuple[str, ...] = ()
    skipped: tuple[str, ...] = ()
    conflicts: tuple[tuple[str, str], ...] = ()
    withdrawn_sessions: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "version": self.version,
            "replaced_version": self.replaced_version,
            "applied": self.applied,
            "migrated": list(self.migrated),
            "skipped": list(self.skipped),
            "conflicts": [{"process_id": pid, "reason": reason} for pid, reason in self.conflicts],
            "withdrawn_sessions": list(self.withdrawn_sessions),
        }


def propagate(
    pvc: PVCState, version_id: str, strategy: PropagationStrategy, *, now: str
) -> PropagationReport:
    """Execute the one-shot propagation decision for a private adapted version.

    Local keeps it private (and does not consume the decision: a group may later
    upgrade to global or instant, never back). Global publishes to the catalog.
    Instant additionally replaces the parent version community-wide: every
    active process ruled by the parent is dry-checked first, and one conflict
    aborts the whole propagation with zero mutations.
    """
    repo = pvc.repository
    protocol = repo.get(version_id)
    scope = repo.visibility.get(version_id)
    if not isinstance(scope, PrivateScope):
        raise EngineError("NOT_PRIVATE", f"version {version_id} is already published; propagation is one-shot")
    edge = repo.edges.get(version_id)
    if edge is None:
        raise EngineError("NO_PARENT", f"version {version_id} has no lineage parent to propagate against")
    parent_id = edge.parent

    if strategy is PropagationStrategy.LOCAL:
        return PropagationReport(
            strategy=strategy, version=version_id, replaced_version=None, applied=True
        )

    if strategy is PropagationStrategy.GLOBAL:
        repo.visibility[version_id] = CatalogScope()
        return PropagationReport(
            strategy=strategy, version=version_id, replaced_version=None, applied=True
        )

    # Instant: all-or-nothing replacement of the parent version.
    ruled = sorted(pid for pid, p in pvc.processes.items() if p.protocol_version == parent_id)
    active = [pid for pid in ruled if pvc.processes[pid].is_active]
    skipped = tuple(pid for pid in ruled if not pvc.processes[pid].is_active)
    conflicts = []
    for pid in active:
        reason = migration_conflict(pvc.processes[pid], protocol)
        if reason is not None:
            conflicts.append((pid, reason))
    if conflicts:
        return PropagationReport(
            strategy=strategy,
            version=version_id,
            replaced_version=parent_id,
            applied=False,
            skipped=skipped,
            conflicts=tuple(conflicts),
        )
    for pid in active:
        outcome = migrate(pvc.processes[pid], protocol, now=now)
        assert outcome is None  # dry-check above makes conflicts unreachable
    withdrawn = []
    for sid in sorted(pvc.sessions):
        session = pvc.sessions[sid]
        if session.status is SessionStatus.OPEN and session.base_version == parent_id:
            withdraw(session)
            withdrawn.append(sid)
    repo.visibility[version_id] = CatalogScope()
    repo.tombstones.add(parent_id)
    return PropagationReport(
        strategy=strategy,
        version=version_id,
        replaced_version=parent_id,
        applied=True,
        migrated=tuple(active),
        skipped=skipped,
        withdrawn_sessions=tuple(withdrawn),
    )


@dataclass(frozen=True)
class CatalogEntry:
    version: str
    protocol_id: str
    refinement: RefinementLevel
    compatible: Optional[bool]
    missing_actions: frozenset[str]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "protocol_id": self.protocol_id,
            "refinement": self.refinement.value,
            "compatible": self.compatible,
            "missing_actions": sorted(self.missing_actions),
        }


def catalog_for(pvc: PVCState, group_id: str) -> list[CatalogEntry]:
    """Versions this group may adopt: the community catalog plus its own private
    versions, minus tombstoned ones, annotated with environment compatibility."""
    group = pvc.groups.get(group_id)
    if group is None:
        raise EngineError("UNKNOWN_GROUP", f"no group {group_id!r}")
    env = pvc.environments.get(group.environment_ref) if group.environment_ref else None

    entries = []
    for version_id in sorted(pvc.repository.versions):
        if version_id in pvc.repository.tombstones:
            continue
        scope = pvc.repository.visibility.get(version_id)
        if isinstance(scope, PrivateScope) and scope.group_id != group_id:
            continue
        protocol = pvc.repository.versions[version_id]
        if env is None:
            compatible, missing = None, frozenset()
        else:
            compatible, missing = check_environment_compatibility(protocol, env)
        entries.append(
            CatalogEntry(
                version=version_id,
                protocol_id=protocol.protocol_id,
                refinement=refinement_level(protocol),
                compatible=compatible,
                missing_actions=missing,
            )
        )
    return sorted(entries, key=lambda e: (e.protocol_id, e.version))


@dataclass(frozen=True)
class AdoptionOutcome:
    candidate: Optional[SocialProtocol]
    missing_actions: frozenset[str]

    @property
    def adopted(self) -> bool:
        return self.candidate is not None


def adopt_cross_environment(
    repo: ProtocolRepository,
    version_id: str,
    env: Environment,
    *,
    action_choices: Optional[Mapping[str, str]] = None,
    role_bindings: Iterable[RoleBinding] = (),
) -> AdoptionOutcome:
    """Rebind a catalogued version for a different environment.

    The version's abstract shape is taken (existing bindings target the origin
    environment and are dropped), then every action is bound to an endpoint from
    ``env``: an explicit choice per action name when given, otherwise the first
    endpoint in sorted order. Actions the environment cannot serve abort the
    adoption, returning their names instead of a candidate.
    """
    protocol = repo.get(version_id)
    abstract = extract_abstract(protocol)
    choices = dict(action_choices or {})

    compatible, missing = check_environment_compatibility(abstract, env)
    if not compatible:
        return AdoptionOutcome(candidate=None, missing_actions=missing)

    for name, uri in choices.items():
        offered = env.services.get(name, frozenset())
        if uri not in offered:
            raise EngineError(
                "BINDING_NOT_IN_ENVIRONMENT",
                f"endpoint {uri!r} is not offered for action {name!r} in environment {env.env_id!r}",
            )
    action_bindings = {}
    for t in abstract.transitions:
        uri = choices.get(t.action.name)
        if uri is None:
            uri = sorted(env.services[t.action.name])[0]
        action_bindings[t.id] = uri
    bound = implement(abstract, role_bindings=role_bindings, action_bindings=action_bindings)
    # Parent the adoption directly onto the adopted version, not the throwaway
    # abstract intermediate, so lineage stays connected.
    candidate = make_protocol(
        protocol_id=bound.protocol_id,
        states=bound.states,
        transitions=bound.transitions,
        roles=bound.roles,
        role_bindings=bound.role_bindings,
        parent_version=version_id,
    )
    return AdoptionOutcome(candidate=candidate, missing_actions=frozenset())


@dataclass(frozen=True)
class LineageHop:
    version: str
    parent: Optional[str]
    negotiation_ref: Optional[str]


def lineage(repo: ProtocolRepository, version_id: str) -> list[LineageHop]:
    """Chain from a version back to its root, one hop per derivation step."""
    repo.get(version_id)
    hops = []
    seen = set()
    current: Optional[str] = version_id
    while current is not None:
        if current in seen:
            raise EngineError("LINEAGE_CYCLE", f"lineage of {version_id} revisits {current}")
        seen.add(current)
        edge = repo.edges.get(current)
        hops.append(
            LineageHop(
                version=current,
                parent=edge.parent if edge else None,
                negotiation_ref=edge.negotiation_ref if edge else None,
            )
        )
        current = edge.parent if edge else None
    return hops


def query_history(repo: ProtocolRepository, version_id: str, requesting_group: str) -> list[dict]:
    """Negotiation records along a version's lineage, redacted for the viewer.

    The group that ran a negotiation sees its full record; other groups see
    non-consenting participants replaced by placeholders.
    """
    views = []
    for hop in lineage(repo, version_id):
        if hop.negotiation_ref is None:
            continue
        record = repo.history.get(hop.negotiation_ref)
        if record is None:
            continue
        views.append(record_view(record, owner=record.group_id == requesting_group))
    return views
