"""Built-in FAQ moderation protocol used by docs, scenarios and tests.

Normal users ask questions, experts answer or remove them, and a manager closes
the exchange by publishing the collected answers or suppressing the thread.
"""

from __future__ import annotations

from .engine import Collaborator, Group
from .model import (
    ActionSpec,
    Environment,
    RoleBinding,
    SocialProtocol,
    StateKind,
    StateNode,
    Transition,
    implement,
    make_protocol,
)

NORMAL_USER = "Normal user"
EXPERT = "Expert"
MANAGER = "Manager"

WS = "http://www.example.org/ws"

FAQ_ACTION_ENDPOINTS = {
    "Ask question": f"{WS}/askQuestion",
    "Answer": f"{WS}/answerQuestion",
    "Remove": f"{WS}/removeQuestion",
    "Failed end": f"{WS}/suppressFAQ",
    "Success": f"{WS}/publishFAQ",
}

COMMENT_ACTION = "comment"
COMMENT_ENDPOINT = f"{WS}/commentAnswer"


def faq_abstract() -> SocialProtocol:
    """The FAQ protocol with no bindings: five states, seven role-gated transitions."""
    states = [
        StateNode("q0", StateKind.START, "Waiting for first question"),
        StateNode("q1", StateKind.INTERMEDIATE, "Waiting for answer"),
        StateNode("q2", StateKind.INTERMEDIATE, "Waiting for next question"),
        StateNode("qF", StateKind.END, "Failed termination", outcome="failure"),
        StateNode("qS", StateKind.END, "Successful termination", outcome="success"),
    ]
    transitions = [
        Transition("t-ask-first", "q0", "q1", NORMAL_USER, ActionSpec("Ask question")),
        Transition("t-answer", "q1", "q2", EXPERT, ActionSpec("Answer")),
        Transition("t-remove", "q1", "q2", EXPERT, ActionSpec("Remove")),
        Transition("t-ask-next", "q2", "q1", NORMAL_USER, ActionSpec("Ask question")),
        Transition("t-fail-answer", "q1", "qF", MANAGER, ActionSpec("Failed end")),
        Transition("t-fail-next", "q2", "qF", MANAGER, ActionSpec("Failed end")),
        Transition("t-success", "q2", "qS", MANAGER, ActionSpec("Success")),
    ]
    return make_protocol(
        protocol_id="faq",
        states=states,
        transitions=transitions,
        roles=[NORMAL_USER, EXPERT, MANAGER],
    )


FAQ_MEMBERS: dict[str, str] = {
    "john.smith": NORMAL_USER,
    "amy.tony": NORMAL_USER,
    "bill.bogard": EXPERT,
    "jennifer.scott": EXPERT,
    "scott.tiger": MANAGER,
    "anna.gates": MANAGER,
}


def faq_collaborators() -> list[Collaborator]:
    display = {cid: cid.replace(".", " ").title() for cid in FAQ_MEMBERS}
    return [Collaborator(id=cid, name=display[cid]) for cid in sorted(FAQ_MEMBERS)]


def faq_role_bindings() -> list[RoleBinding]:
    by_role: dict[str, set[str]] = {}
    for cid, role in FAQ_MEMBERS.items():
        by_role.setdefault(role, set()).add(cid)
    return [RoleBinding(role=role, collaborators=frozenset(ids)) for role, ids in sorted(by_role.items())]


def faq_implemented() -> SocialProtocol:
    """Fully implemented FAQ: every action bound to its web service, every role staffed."""
    abstract = faq_abstract()
    action_bindings = {t.id: FAQ_ACTION_ENDPOINTS[t.action.name] for t in abstract.transitions}
    return implement(abstract, role_bindings=faq_role_bindings(), action_bindings=action_bindings)


def faq_environment(env_id: str = "env-main") -> Environment:
    """Environment offering every FAQ service plus the comment service."""
    services = {name: frozenset({uri}) for name, uri in FAQ_ACTION_ENDPOINTS.items()}
    services[COMMENT_ACTION] = frozenset({COMMENT_ENDPOINT})
    return Environment(env_id=env_id, services=services)


def faq_environment_no_comment(env_id: str = "env-no-comment") -> Environment:
    """Same services minus commenting; incompatible with comment-bearing variants."""
    return Environment(
        env_id=env_id,
        services={name: frozenset({uri}) for name, uri in FAQ_ACTION_ENDPOINTS.items()},
    )


def faq_environment_alt_comment(env_id: str = "env-alt") -> Environment:
    """Compatible environment whose comment service lives at a different endpoint."""
    services = {name: frozenset({uri}) for name, uri in FAQ_ACTION_ENDPOINTS.items()}
    services[COMMENT_ACTION] = frozenset({"http://alt.example.org/ws/commentAnswer"})
    return Environment(env_id=env_id, services=services)


def faq_group(group_id: str = "grp-faq", environment_ref: str = "env-main") -> Group:
    return Group(
        group_id=group_id,
        members={cid: frozenset({role}) for cid, role in FAQ_MEMBERS.items()},
        environment_ref=environment_ref,
    )
