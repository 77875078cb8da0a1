"""Shared helpers for the test suite: seeded random generators and an
independent validation oracle.

The oracle deliberately computes reachability with a Warshall transitive
closure instead of the library's BFS, so the two can disagree if either is
wrong.
"""

from __future__ import annotations

import random
from typing import Optional

from socialproto import (
    ActionSpec,
    Environment,
    Group,
    RoleBinding,
    SocialProtocol,
    StateKind,
    StateNode,
    Transition,
    implement,
    make_protocol,
)

ROLE_POOL = ("author", "reviewer", "moderator", "owner")
ACTION_POOL = ("draft", "review", "publish", "archive", "notify")
PEOPLE = ("ada", "ben", "cleo", "dan", "eve", "finn", "gus", "hana")


# ---------------------------------------------------------------------------
# Validation oracle (Warshall closure, no BFS)
# ---------------------------------------------------------------------------


def closure_reachability(protocol: SocialProtocol) -> tuple[set[str], set[str]]:
    """(reachable-from-start, can-reach-end) via boolean transitive closure."""
    ids = sorted({s.id for s in protocol.states})
    index = {sid: i for i, sid in enumerate(ids)}
    n = len(ids)
    step = [[False] * n for _ in range(n)]
    for t in protocol.transitions:
        if t.from_state in index and t.to_state in index:
            step[index[t.from_state]][index[t.to_state]] = True
    closure = [row[:] for row in step]
    for k in range(n):
        for i in range(n):
            if closure[i][k]:
                row_i, row_k = closure[i], closure[k]
                for j in range(n):
                    if row_k[j]:
                        row_i[j] = True
    starts = {s.id for s in protocol.states if s.kind is StateKind.START}
    ends = {s.id for s in protocol.states if s.kind is StateKind.END}
    reachable = set(s for s in starts if s in index)
    for s in starts:
        if s in index:
            for j in range(n):
                if closure[index[s]][j]:
                    reachable.add(ids[j])
    coreachable = set(e for e in ends if e in index)
    for i in range(n):
        if any(closure[i][index[e]] for e in ends if e in index):
            coreachable.add(ids[i])
    return reachable, coreachable


def oracle_findings(protocol: SocialProtocol) -> tuple[set[tuple[str, str]], set[tuple[str, str]]]:
    """Expected (error, warning) findings as {(code, subject)} sets."""
    errors: set[tuple[str, str]] = set()
    warnings: set[tuple[str, str]] = set()

    state_id_list = [s.id for s in protocol.states]
    for sid in {x for x in state_id_list if state_id_list.count(x) > 1}:
        errors.add(("DUPLICATE_ID", sid))
    transition_id_list = [t.id for t in protocol.transitions]
    for tid in {x for x in transition_id_list if transition_id_list.count(x) > 1}:
        errors.add(("DUPLICATE_ID", tid))

    state_ids = set(state_id_list)
    starts = {s.id for s in protocol.states if s.kind is StateKind.START}
    ends = {s.id for s in protocol.states if s.kind is StateKind.END}
    if not starts:
        errors.add(("NO_START_STATE", protocol.protocol_id))
    if not ends:
        errors.add(("NO_END_STATE", protocol.protocol_id))
    for sid in starts & ends:
        errors.add(("START_END_OVERLAP", sid))

    for t in protocol.transitions:
        if t.from_state not in state_ids or t.to_state not in state_ids:
            errors.add(("DANGLING_TRANSITION", t.id))
        if t.from_state in ends:
            errors.add(("END_STATE_EXIT", t.id))
        if t.role not in protocol.roles:
            errors.add(("UNDECLARED_ROLE", t.id))

    reachable, coreachable = closure_reachability(protocol)
    for sid in state_ids:
        if sid not in reachable:
            errors.add(("UNREACHABLE_STATE", sid))
        elif sid not in coreachable:
            errors.add(("NO_PATH_TO_END", sid))

    used_roles = {t.role for t in protocol.transitions}
    for role in protocol.roles - used_roles:
        warnings.add(("UNUSED_ROLE", role))
    by_action: dict[str, set[str]] = {}
    for t in protocol.transitions:
        if t.action.binding is not None:
            by_action.setdefault(t.action.name, set()).add(t.action.binding)
    for name, uris in by_action.items():
        if len(uris) > 1:
            warnings.add(("INCONSISTENT_ACTION_BINDING", name))

    return errors, warnings


# ---------------------------------------------------------------------------
# Random protocol generators
# ---------------------------------------------------------------------------


def random_candidate(rng: random.Random, max_states: int = 12) -> SocialProtocol:
    """An arbitrary protocol-shaped value; most are broken in some way."""
    n = rng.randint(0, max_states)
    states: list[StateNode] = []
    for i in range(n):
        kind = rng.choices(
            (StateKind.START, StateKind.INTERMEDIATE, StateKind.END), weights=(2, 5, 2)
        )[0]
        outcome = rng.choice((None, "success", "failure")) if kind is StateKind.END else None
        states.append(StateNode(f"s{i}", kind, label=f"state {i}", outcome=outcome))
    if states and rng.random() < 0.15:
        twin = rng.choice(states)
        states.append(StateNode(twin.id, rng.choice(list(StateKind))))

    declared = frozenset(rng.sample(ROLE_POOL, rng.randint(0, len(ROLE_POOL))))
    endpoints = list({s.id for s in states}) + ["ghost-a", "ghost-b"]
    transitions: list[Transition] = []
    for i in range(rng.randint(0, max_states + 6)):
        name = rng.choice(ACTION_POOL)
        binding = rng.choice((None, f"http://svc.test/{name}", f"http://svc.test/{name}2"))
        transitions.append(
            Transition(
                id=f"t{i}",
                from_state=rng.choice(endpoints),
                to_state=rng.choice(endpoints),
                role=rng.choice(ROLE_POOL),
                action=ActionSpec(name, binding),
            )
        )
    if transitions and rng.random() < 0.1:
        twin_t = rng.choice(transitions)
        transitions.append(
            Transition(twin_t.id, twin_t.from_state, twin_t.to_state, twin_t.role, twin_t.action)
        )
    return make_protocol(
        protocol_id=f"cand-{rng.randrange(10**6)}",
        states=states,
        transitions=transitions,
        roles=declared,
    )


def random_valid_protocol(
    rng: random.Random,
    max_states: int = 12,
    protocol_id: Optional[str] = None,
) -> SocialProtocol:
    """A structurally valid abstract protocol, constructed so that every state is
    reachable from a start and every state can reach an end."""
    n = rng.randint(2, max_states)
    n_start = 1 if n < 4 else rng.choice((1, 1, 1, 2))
    n_end = 1 if n < 4 else rng.choice((1, 1, 2))
    kinds = [StateKind.START] * n_start + [StateKind.END] * n_end
    kinds += [StateKind.INTERMEDIATE] * (n - len(kinds))
    rng.shuffle(kinds)
    states = [
        StateNode(
            f"s{i}",
            kind,
            label=f"step {i}",
            outcome=rng.choice((None, "success", "failure")) if kind is StateKind.END else None,
        )
        for i, kind in enumerate(kinds)
    ]
    starts = [s.id for s in states if s.kind is StateKind.START]
    ends = {s.id for s in states if s.kind is StateKind.END}
    non_end = [s.id for s in states if s.kind is not StateKind.END]

    edges: list[tuple[str, str]] = []
    # forward pass: connect every state to the start side
    covered = set(starts)
    for s in states:
        if s.id in covered:
            continue
        source = rng.choice([c for c in covered if c not in ends] or starts)
        edges.append((source, s.id))
        covered.add(s.id)
    # backward pass: give every non-end state a path to an end
    reaches_end = set(ends)
    pending = [sid for sid in non_end if sid not in reaches_end]
    while True:
        progressed = True
        while progressed:
            progressed = False
            for frm, to in edges:
                if to in reaches_end and frm not in reaches_end:
                    reaches_end.add(frm)
                    progressed = True
        pending = [sid for sid in non_end if sid not in reaches_end]
        if not pending:
            break
        sid = rng.choice(pending)
        edges.append((sid, rng.choice(sorted(reaches_end))))
        reaches_end.add(sid)
    # noise edges never leave an end state
    for _ in range(rng.randint(0, n)):
        edges.append((rng.choice(non_end), rng.choice([s.id for s in states])))

    transitions = [
        Transition(
            id=f"t{i}",
            from_state=frm,
            to_state=to,
            role=rng.choice(ROLE_POOL),
            action=ActionSpec(rng.choice(ACTION_POOL)),
        )
        for i, (frm, to) in enumerate(edges)
    ]
    used_roles = {t.role for t in transitions}
    return make_protocol(
        protocol_id=protocol_id or f"proto-{rng.randrange(10**6)}",
        states=states,
        transitions=transitions,
        roles=used_roles,
    )


def random_implemented_protocol(rng: random.Random, max_states: int = 12) -> SocialProtocol:
    """A valid implemented protocol with a uniform endpoint per action name."""
    abstract = random_valid_protocol(rng, max_states)
    return implement(
        abstract,
        role_bindings=random_role_bindings(rng, abstract),
        action_bindings={t.id: f"http://svc.test/{t.action.name}" for t in abstract.transitions},
    )


def random_role_bindings(rng: random.Random, protocol: SocialProtocol) -> list[RoleBinding]:
    return [
        RoleBinding(role=role, collaborators=frozenset(rng.sample(PEOPLE, rng.randint(1, 3))))
        for role in sorted(protocol.roles)
    ]


def random_group(rng: random.Random, protocol: SocialProtocol, group_id: str = "grp-rand") -> Group:
    """A group whose members all hold roles declared by the protocol."""
    roles = sorted(protocol.roles)
    members = {
        person: frozenset(rng.sample(roles, rng.randint(1, min(2, len(roles)))))
        for person in rng.sample(PEOPLE, rng.randint(2, 6))
    }
    return Group(group_id=group_id, members=members)


def environment_for(protocol: SocialProtocol, env_id: str = "env-rand") -> Environment:
    services = {name: frozenset({f"http://svc.test/{name}"}) for name in protocol.action_names()}
    return Environment(env_id=env_id, services=services)
