"""Negotiated adaptation: proposal chains, voting, atomic close, consent-aware records.

A session belongs to one process. Proposals form a linear chain (each new one
supersedes the current head); votes attach to a specific proposal and do not
carry over. Closing either commits the whole adaptation (new version plus
process migration) or changes nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Union

from .errors import EngineError
from .engine import SocialProcess, migration_conflict, migrate
from .model import (
    ProtocolPatch,
    RefinementLevel,
    SocialProtocol,
    apply_patch,
    patch_from_doc,
    patch_to_doc,
    refinement_level,
    validate_structure,
)


class VoteValue(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class SessionStatus(str, Enum):
    OPEN = "open"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    WITHDRAWN = "withdrawn"


@dataclass(frozen=True)
class Unanimity:
    pass


@dataclass(frozen=True)
class Quorum:
    fraction: float

    def __post_init__(self) -> None:
        if not 0 < self.fraction <= 1:
            raise EngineError("INVALID_RULE", f"quorum fraction must be in (0, 1], got {self.fraction}")


AcceptanceRule = Union[Unanimity, Quorum]


def rule_to_doc(rule: AcceptanceRule) -> dict:
    if isinstance(rule, Unanimity):
        return {"kind": "unanimity"}
    return {"kind": "quorum", "fraction": rule.fraction}


def rule_from_doc(doc: Mapping) -> AcceptanceRule:
    if doc.get("kind") == "unanimity":
        return Unanimity()
    if doc.get("kind") == "quorum":
        return Quorum(fraction=doc["fraction"])
    raise EngineError("INVALID_RULE", f"unknown acceptance rule {doc!r}")


@dataclass(frozen=True)
class Proposal:
    proposal_id: str
    author: str
    patch: ProtocolPatch
    rationale: str = ""
    supersedes: Optional[str] = None


@dataclass(frozen=True)
class Vote:
    voter: str
    proposal_id: str
    value: VoteValue


@dataclass
class NegotiationSession:
    session_id: str
    process_id: str
    group_id: str
    base_version: str
    participants: frozenset[str]
    rule: AcceptanceRule
    opened_by: str
    proposals: list[Proposal] = field(default_factory=list)
    # votes[proposal_id][voter] -> value; re-votes overwrite
    votes: dict[str, dict[str, VoteValue]] = field(default_factory=dict)
    status: SessionStatus = SessionStatus.OPEN
    result_version: Optional[str] = None

    @property
    def active_proposal(self) -> Proposal:
        return self.proposals[-1]

    def proposal(self, proposal_id: str) -> Proposal:
        for p in self.proposals:
            if p.proposal_id == proposal_id:
                return p
        raise EngineError("UNKNOWN_PROPOSAL", f"no proposal {proposal_id!r} in session {self.session_id!r}")


def open_negotiation(
    process: SocialProcess,
    initiator: str,
    patch: ProtocolPatch,
    rationale: str = "",
    *,
    session_id: str,
    proposal_id: str,
    rule: AcceptanceRule = Unanimity(),
) -> NegotiationSession:
    """Open a session on an active process with an initial proposal.

    Every current group member becomes a participant; the roster is a snapshot,
    which is why later splits and merges void open sessions.
    """
    if process.superseded:
        raise EngineError("PROCESS_RETIRED", f"process {process.process_id!r} was retired")
    if not process.is_active:
        raise EngineError("PROCESS_COMPLETED", "cannot negotiate over a completed process")
    if initiator not in process.group.members:
        raise EngineError("UNKNOWN_COLLABORATOR", f"{initiator!r} is not a member of the process group")
    session = NegotiationSession(
        session_id=session_id,
        process_id=process.process_id,
        group_id=process.group.group_id,
        base_version=process.protocol_version,
        participants=frozenset(process.group.members),
        rule=rule,
        opened_by=initiator,
    )
    session.proposals.append(Proposal(proposal_id=proposal_id, author=initiator, patch=patch, rationale=rationale))
    return session


def propose_amendment(
    session: NegotiationSession,
    author: str,
    patch: ProtocolPatch,
    rationale: str = "",
    *,
    proposal_id: str,
    supersedes: Optional[str] = None,
) -> Proposal:
    """Add a counter-proposal. It supersedes the current head and becomes the one
    the rule is evaluated against; earlier votes do not carry over."""
    if session.status is not SessionStatus.OPEN:
        raise EngineError("SESSION_CLOSED", f"session {session.session_id!r} is {session.status.value}")
    if author not in session.participants:
        raise EngineError("NOT_PARTICIPANT", f"{author!r} is not a participant")
    if any(p.proposal_id == proposal_id for p in session.proposals):
        raise EngineError("DUPLICATE_ID", f"proposal id {proposal_id!r} already used")
    head = session.active_proposal.proposal_id
    if supersedes is None:
        supersedes = head
    else:
        session.proposal(supersedes)  # must exist
        if supersedes != head:
            raise EngineError("PROPOSAL_SUPERSEDED", f"proposal {supersedes!r} was already superseded")
    proposal = Proposal(
        proposal_id=proposal_id, author=author, patch=patch, rationale=rationale, supersedes=supersedes
    )
    session.proposals.append(proposal)
    return proposal


def cast_vote(session: NegotiationSession, voter: str, proposal_id: str, value: VoteValue) -> Vote:
    """Vote on the active proposal. Re-voting overwrites; votes on superseded
    proposals are refused."""
    if session.status is not SessionStatus.OPEN:
        raise EngineError("SESSION_CLOSED", f"session {session.session_id!r} is {session.status.value}")
    if voter not in session.participants:
        raise EngineError("NOT_PARTICIPANT", f"{voter!r} is not a participant")
    session.proposal(proposal_id)
    if proposal_id != session.active_proposal.proposal_id:
        raise EngineError("PROPOSAL_SUPERSEDED", f"proposal {proposal_id!r} was superseded; vote on the head")
    session.votes.setdefault(proposal_id, {})[voter] = value
    return Vote(voter=voter, proposal_id=proposal_id, value=value)


@dataclass(frozen=True)
class CloseOutcome:
    ruling: str  # "accepted" | "rejected"
    accepted_proposal_id: Optional[str]
    candidate: Optional[SocialProtocol]
    tally: Mapping[str, int]


def _rule_met(rule: AcceptanceRule, accepts: int, participants: int) -> bool:
    if isinstance(rule, Unanimity):
        return accepts == participants
    return accepts / participants >= rule.fraction


def close_negotiation(
    session: NegotiationSession,
    closer: str,
    base: SocialProtocol,
    process: SocialProcess,
    *,
    now: str,
) -> CloseOutcome:
    """Evaluate the rule against the head proposal and commit or reject atomically.

    An accepted close builds the candidate (base + patch), requires it to be a
    valid implemented protocol, dry-checks the process migration, and only then
    mutates anything: the session is marked accepted and the process migrates.
    Any failure along the way raises and leaves the session open and the process
    untouched. A clean close whose votes simply do not meet the rule marks the
    session rejected.
    """
    if session.status is not SessionStatus.OPEN:
        raise EngineError("SESSION_CLOSED", f"session {session.session_id!r} is {session.status.value}")
    if closer not in session.participants:
        raise EngineError("NOT_PARTICIPANT", f"{closer!r} is not a participant")
    if process.process_id != session.process_id:
        raise EngineError("UNKNOWN_PROCESS", f"session belongs to process {session.process_id!r}")
    if base.version != session.base_version or process.protocol_version != session.base_version:
        raise EngineError(
            "PROTOCOL_MISMATCH",
            f"session negotiates over {session.base_version} but was given {base.version} / "
            f"{process.protocol_version}",
        )

    head = session.active_proposal
    votes = session.votes.get(head.proposal_id, {})
    missing = session.participants - set(votes)
    if missing:
        raise EngineError(
            "VOTES_PENDING",
            f"{len(missing)} participant(s) have not voted on the head proposal",
            missing=sorted(missing),
        )
    accepts = sum(1 for v in votes.values() if v is VoteValue.ACCEPT)
    rejects = len(votes) - accepts
    tally = {"accept": accepts, "reject": rejects}

    if not _rule_met(session.rule, accepts, len(session.participants)):
        session.status = SessionStatus.REJECTED
        return CloseOutcome(ruling="rejected", accepted_proposal_id=None, candidate=None, tally=tally)

    try:
        candidate = apply_patch(base, head.patch)
    except EngineError as exc:
        raise EngineError(
            "ADAPTATION_INVALID", f"accepted patch does not apply to the base protocol: {exc.message}"
        ) from exc
    report = validate_structure(candidate)
    if not report.valid:
        raise EngineError(
            "ADAPTATION_INVALID",
            "accepted patch yields an invalid protocol",
            findings=[f.code for f in report.errors()],
        )
    if refinement_level(candidate) is not RefinementLevel.IMPLEMENTED:
        raise EngineError(
            "ADAPTATION_INVALID",
            "adapted protocol must stay fully implemented so the process can keep running",
        )
    conflict = migration_conflict(process, candidate)
    if conflict is not None:
        raise EngineError("ADAPTATION_CONFLICT", conflict)

    migrated = migrate(process, candidate, now=now)
    assert migrated is None  # dry-check above makes this unreachable
    session.status = SessionStatus.ACCEPTED
    session.result_version = candidate.version
    return CloseOutcome(
        ruling="accepted", accepted_proposal_id=head.proposal_id, candidate=candidate, tally=tally
    )


def withdraw(session: NegotiationSession) -> None:
    """Void an open session (group membership changed or the base version was
    replaced community-wide). Closed sessions are left alone."""
    if session.status is SessionStatus.OPEN:
        session.status = SessionStatus.WITHDRAWN


# ---------------------------------------------------------------------------
# Negotiation records and consent-aware views
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NegotiationRecord:
    """Immutable account of a finished session, stored per resulting version.

    ``consents`` marks which participants agreed to be identifiable outside
    their own team; everyone else is redacted in cross-team views.
    """

    session_id: str
    process_id: str
    group_id: str
    base_version: str
    result_version: Optional[str]
    status: str
    rule: dict
    participants: tuple[str, ...]
    proposals: tuple[Proposal, ...]
    votes: Mapping[str, Mapping[str, str]]
    consents: Mapping[str, bool]
    recorded_at: str


def record_history(session: NegotiationSession, consents: Mapping[str, bool], *, now: str) -> NegotiationRecord:
    """Freeze a closed session into a record. Participants missing from
    ``consents`` default to not consenting."""
    if session.status is SessionStatus.OPEN:
        raise EngineError("SESSION_OPEN", f"session {session.session_id!r} is still open")
    unknown = set(consents) - set(session.participants)
    if unknown:
        raise EngineError("NOT_PARTICIPANT", f"consent given for non-participants: {sorted(unknown)}")
    full_consents = {p: bool(consents.get(p, False)) for p in sorted(session.participants)}
    return NegotiationRecord(
        session_id=session.session_id,
        process_id=session.process_id,
        group_id=session.group_id,
        base_version=session.base_version,
        result_version=session.result_version,
        status=session.status.value,
        rule=rule_to_doc(session.rule),
        participants=tuple(sorted(session.participants)),
        proposals=tuple(session.proposals),
        votes={pid: {voter: v.value for voter, v in votes.items()} for pid, votes in sorted(session.votes.items())},
        consents=full_consents,
        recorded_at=now,
    )


def proposal_to_doc(p: Proposal) -> dict:
    return {
        "proposal_id": p.proposal_id,
        "author": p.author,
        "patch": patch_to_doc(p.patch),
        "rationale": p.rationale,
        "supersedes": p.supersedes,
    }


def proposal_from_doc(doc: Mapping) -> Proposal:
    return Proposal(
        proposal_id=doc["proposal_id"],
        author=doc["author"],
        patch=patch_from_doc(doc["patch"]),
        rationale=doc.get("rationale", ""),
        supersedes=doc.get("supersedes"),
    )


def record_to_doc(record: NegotiationRecord) -> dict:
    return {
        "session_id": record.session_id,
        "process_id": record.process_id,
        "group_id": record.group_id,
        "base_version": record.base_version,
        "result_version": record.result_version,
        "status": record.status,
        "rule": dict(record.rule),
        "participants": list(record.participants),
        "proposals": [proposal_to_doc(p) for p in record.proposals],
        "votes": {pid: dict(sorted(votes.items())) for pid, votes in record.votes.items()},
        "consents": dict(sorted(record.consents.items())),
        "recorded_at": record.recorded_at,
    }


def record_from_doc(doc: Mapping) -> NegotiationRecord:
    return NegotiationRecord(
        session_id=doc["session_id"],
        process_id=doc["process_id"],
        group_id=doc["group_id"],
        base_version=doc["base_version"],
        result_version=doc.get("result_version"),
        status=doc["status"],
        rule=dict(doc["rule"]),
        participants=tuple(doc["participants"]),
        proposals=tuple(proposal_from_doc(p) for p in doc["proposals"]),
        votes={pid: dict(votes) for pid, votes in doc["votes"].items()},
        consents=dict(doc["consents"]),
        recorded_at=doc["recorded_at"],
    )


def record_view(record: NegotiationRecord, *, owner: bool) -> dict:
    """Serialize a record for a viewer. The owning team sees everything; other
    teams see non-consenting participants as stable placeholders with their
    votes dropped and their proposals' content withheld."""
    doc = record_to_doc(record)
    if owner:
        return doc
    hidden = sorted(p for p in record.participants if not record.consents.get(p, False))
    alias = {p: f"[redacted-{i + 1}]" for i, p in enumerate(hidden)}

    doc["participants"] = [alias.get(p, p) for p in doc["participants"]]
    doc["consents"] = {alias.get(p, p): v for p, v in doc["consents"].items()}
    for proposal in doc["proposals"]:
        if proposal["author"] in alias:
            proposal["author"] = alias[proposal["author"]]
            proposal["patch"] = None
            proposal["rationale"] = None
    doc["votes"] = {
        pid: {voter: v for voter, v in votes.items() if voter not in alias}
        for pid, votes in doc["votes"].items()
    }
    return doc
