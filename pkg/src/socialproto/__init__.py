"""Adaptive collaboration protocols: role-gated state machines that groups run,
renegotiate at runtime, and share across a community at chosen visibility."""

from .errors import EngineError
from .model import (
    ActionSpec,
    AddState,
    AddTransition,
    BindAction,
    BindRole,
    Environment,
    ProtocolPatch,
    RefinementLevel,
    RemoveState,
    RemoveTransition,
    RoleBinding,
    SocialProtocol,
    StateKind,
    StateNode,
    Transition,
    UnbindAction,
    UnbindRole,
    ValidationReport,
    apply_patch,
    check_environment_compatibility,
    diff,
    dump_protocol,
    extract_abstract,
    implement,
    load_protocol,
    make_protocol,
    patch,
    refinement_level,
    structural_key,
    structurally_equal,
    validate_structure,
)
from .engine import (
    ActionExecutor,
    ActionResult,
    Collaborator,
    Group,
    MockActionExecutor,
    ProcessStatus,
    SocialProcess,
    TransitionEvent,
    available_transitions,
    instantiate,
    merge_groups,
    migrate,
    migration_conflict,
    outcome,
    split_group,
    trigger,
)
from .negotiation import (
    AcceptanceRule,
    NegotiationRecord,
    NegotiationSession,
    Proposal,
    Quorum,
    SessionStatus,
    Unanimity,
    Vote,
    VoteValue,
    cast_vote,
    close_negotiation,
    open_negotiation,
    propose_amendment,
    record_history,
    record_view,
)
from .inheritance import (
    AdoptionOutcome,
    CatalogEntry,
    CatalogScope,
    LineageEdge,
    LineageHop,
    PrivateScope,
    PropagationReport,
    PropagationStrategy,
    ProtocolRepository,
    PVCState,
    adopt_cross_environment,
    catalog_for,
    derive_version,
    lineage,
    propagate,
    query_history,
    register_protocol,
)
from .serialize import serialize_state, state_from_doc, state_to_doc

__version__ = "0.1.0"
