"""Process engine: instantiation, role-gated triggering, group actions and
protocol migration."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialproto import (
    ActionResult,
    ActionSpec,
    AddTransition,
    EngineError,
    Group,
    MockActionExecutor,
    ProcessStatus,
    RemoveState,
    RemoveTransition,
    RoleBinding,
    StateKind,
    StateNode,
    Transition,
    apply_patch,
    available_transitions,
    implement,
    instantiate,
    make_protocol,
    merge_groups,
    migrate,
    migration_conflict,
    outcome,
    patch,
    split_group,
    trigger,
)
from socialproto.fixtures import EXPERT, FAQ_MEMBERS, MANAGER, NORMAL_USER, faq_abstract, faq_group, faq_implemented
from support import random_group, random_implemented_protocol

T0 = "2026-01-01T00:00:00+00:00"


def fire(process, protocol, who, tid, executor=None):
    return trigger(process, protocol, who, tid, executor=executor or MockActionExecutor(), now=T0)


def two_start_protocol():
    p = make_protocol(
        protocol_id="fork",
        states=[
            StateNode("a", StateKind.START),
            StateNode("b", StateKind.START),
            StateNode("z", StateKind.END),
        ],
        transitions=[
            Transition("ta", "a", "z", "r", ActionSpec("go", "http://svc.test/go")),
            Transition("tb", "b", "z", "r", ActionSpec("go", "http://svc.test/go")),
        ],
        roles=["r"],
        role_bindings=[RoleBinding("r", frozenset({"ada"}))],
    )
    return p


# ---------------------------------------------------------------------------
# instantiate
# ---------------------------------------------------------------------------


class TestInstantiate:
    def test_starts_at_the_start_state(self, process):
        assert process.current_state == "q0"
        assert process.status is ProcessStatus.RUNNING
        assert process.history == []
        assert not process.superseded

    def test_abstract_protocols_cannot_run(self, group):
        with pytest.raises(EngineError) as excinfo:
            instantiate(faq_abstract(), group, process_id="p")
        assert excinfo.value.code == "NOT_IMPLEMENTED_PROTOCOL"

    def test_two_starts_need_a_choice(self):
        g = Group(group_id="g", members={"ada": frozenset({"r"})})
        with pytest.raises(EngineError) as excinfo:
            instantiate(two_start_protocol(), g, process_id="p")
        assert excinfo.value.code == "AMBIGUOUS_START"
        chosen = instantiate(two_start_protocol(), g, process_id="p", start_state="b")
        assert chosen.current_state == "b"

    def test_start_choice_must_be_a_start_state(self):
        g = Group(group_id="g", members={"ada": frozenset({"r"})})
        with pytest.raises(EngineError) as excinfo:
            instantiate(two_start_protocol(), g, process_id="p", start_state="z")
        assert excinfo.value.code == "UNKNOWN_STATE"

    def test_member_roles_must_be_declared(self, faq):
        g = Group(group_id="g", members={"ada": frozenset({"Pilot"})})
        with pytest.raises(EngineError) as excinfo:
            instantiate(faq, g, process_id="p")
        assert excinfo.value.code == "UNKNOWN_ROLE_ASSIGNMENT"


# ---------------------------------------------------------------------------
# available_transitions
# ---------------------------------------------------------------------------


class TestAvailableTransitions:
    def test_normal_user_may_open_the_faq(self, process, faq):
        assert [t.id for t in available_transitions(process, faq, "john.smith")] == ["t-ask-first"]

    def test_manager_has_nothing_at_the_start(self, process, faq):
        assert available_transitions(process, faq, "scott.tiger") == []

    def test_non_member_raises(self, process, faq):
        with pytest.raises(EngineError) as excinfo:
            available_transitions(process, faq, "stranger")
        assert excinfo.value.code == "UNKNOWN_COLLABORATOR"

    def test_completed_processes_offer_nothing(self, process, faq, executor):
        fire(process, faq, "john.smith", "t-ask-first", executor)
        fire(process, faq, "jennifer.scott", "t-answer", executor)
        fire(process, faq, "scott.tiger", "t-success", executor)
        assert process.status is ProcessStatus.COMPLETED
        for member in FAQ_MEMBERS:
            assert available_transitions(process, faq, member) == []

    def test_listing_agrees_with_trigger(self, faq, group, executor):
        # Whatever is listed must fire; whatever is not listed must be refused
        # for role or source-state reasons.
        process = instantiate(faq, group, process_id="p")
        rng = random.Random(5)
        for _ in range(12):
            if process.status is not ProcessStatus.RUNNING:
                break
            member = rng.choice(sorted(FAQ_MEMBERS))
            offered = {t.id for t in available_transitions(process, faq, member)}
            for t in faq.transitions:
                if t.id in offered:
                    continue
                with pytest.raises(EngineError) as excinfo:
                    fire(process, faq, member, t.id, executor)
                assert excinfo.value.code in {"ROLE_MISMATCH", "WRONG_SOURCE_STATE"}
            if offered:
                fire(process, faq, member, rng.choice(sorted(offered)), executor)


# ---------------------------------------------------------------------------
# trigger / outcome
# ---------------------------------------------------------------------------


class TestTrigger:
    def test_single_step(self, process, faq, executor):
        event = fire(process, faq, "john.smith", "t-ask-first", executor)
        assert (event.from_state, event.to_state) == ("q0", "q1")
        assert process.current_state == "q1"
        assert [e.seq for e in process.history] == [1]
        assert executor.calls[0][0] == "http://www.example.org/ws/askQuestion"

    def test_wrong_role_is_refused(self, process, faq, executor):
        fire(process, faq, "john.smith", "t-ask-first", executor)
        with pytest.raises(EngineError) as excinfo:
            fire(process, faq, "bill.bogard", "t-fail-answer", executor)
        assert excinfo.value.code == "ROLE_MISMATCH"
        assert process.current_state == "q1"

    def test_wrong_source_state_is_refused(self, process, faq, executor):
        with pytest.raises(EngineError) as excinfo:
            fire(process, faq, "jennifer.scott", "t-answer", executor)
        assert excinfo.value.code == "WRONG_SOURCE_STATE"

    def test_unknown_actor_and_transition(self, process, faq, executor):
        with pytest.raises(EngineError) as excinfo:
            fire(process, faq, "stranger", "t-ask-first", executor)
        assert excinfo.value.code == "UNKNOWN_COLLABORATOR"
        with pytest.raises(EngineError) as excinfo:
            fire(process, faq, "john.smith", "t-warp", executor)
        assert excinfo.value.code == "UNKNOWN_TRANSITION"

    def test_completion_through_success(self, process, faq, executor):
        fire(process, faq, "john.smith", "t-ask-first", executor)
        fire(process, faq, "jennifer.scott", "t-answer", executor)
        fire(process, faq, "scott.tiger", "t-success", executor)
        assert process.status is ProcessStatus.COMPLETED
        assert process.current_state == "qS"
        assert outcome(process, faq) == "success"
        with pytest.raises(EngineError) as excinfo:
            fire(process, faq, "john.smith", "t-ask-first", executor)
        assert excinfo.value.code == "PROCESS_COMPLETED"

    def test_failure_end_state(self, process, faq, executor):
        fire(process, faq, "john.smith", "t-ask-first", executor)
        fire(process, faq, "scott.tiger", "t-fail-answer", executor)
        assert outcome(process, faq) == "failure"

    def test_outcome_is_none_while_running(self, process, faq):
        assert outcome(process, faq) is None

    def test_failed_action_leaves_state_alone(self, process, faq, executor):
        executor.fail_endpoint("http://www.example.org/ws/askQuestion", "boom")
        with pytest.raises(EngineError) as excinfo:
            fire(process, faq, "john.smith", "t-ask-first", executor)
        assert excinfo.value.code == "ACTION_FAILED"
        assert process.current_state == "q0"
        assert process.status is ProcessStatus.RUNNING
        # the refusal is still part of the record
        assert len(process.history) == 1
        assert process.history[0].action_result == {"ok": False, "error": "boom"}
        executor.restore("http://www.example.org/ws/askQuestion")
        fire(process, faq, "john.smith", "t-ask-first", executor)
        assert process.current_state == "q1"

    def test_executor_called_exactly_once_per_trigger(self, process, faq, executor):
        fire(process, faq, "john.smith", "t-ask-first", executor)
        assert len(executor.calls) == 1

    def test_history_chains_from_state_to_state(self, faq, group, executor):
        process = instantiate(faq, group, process_id="p")
        fire(process, faq, "john.smith", "t-ask-first", executor)
        fire(process, faq, "jennifer.scott", "t-answer", executor)
        fire(process, faq, "amy.tony", "t-ask-next", executor)
        fire(process, faq, "bill.bogard", "t-remove", executor)
        seqs = [e.seq for e in process.history]
        assert seqs == [1, 2, 3, 4]
        previous = "q0"
        for event in process.history:
            assert event.from_state == previous
            previous = event.to_state
        assert previous == process.current_state


# ---------------------------------------------------------------------------
# split / merge
# ---------------------------------------------------------------------------

PARTITION = (
    frozenset({"john.smith", "bill.bogard", "scott.tiger"}),
    frozenset({"amy.tony", "jennifer.scott", "anna.gates"}),
)


def split_fixture(process, faq, executor):
    fire(process, faq, "john.smith", "t-ask-first", executor)
    fire(process, faq, "jennifer.scott", "t-answer", executor)
    return split_group(
        process,
        PARTITION,
        child_ids=("p-left", "p-right"),
        child_group_ids=("g-left", "g-right"),
    )


class TestSplitMerge:
    def test_children_share_state_version_and_history(self, process, faq, executor):
        left, right = split_fixture(process, faq, executor)
        assert process.superseded
        for child in (left, right):
            assert child.current_state == "q2"
            assert child.protocol_version == faq.version
            assert [e.to_dict() if hasattr(e, "to_dict") else e for e in child.history] == [
                e.to_dict() if hasattr(e, "to_dict") else e for e in process.history
            ]
        assert left.group.members == {m: frozenset({FAQ_MEMBERS[m]}) for m in PARTITION[0]}

    def test_partition_must_cover_every_member(self, process):
        bad = (frozenset({"john.smith"}), frozenset({"amy.tony"}))
        with pytest.raises(EngineError) as excinfo:
            split_group(process, bad, child_ids=("a", "b"), child_group_ids=("ga", "gb"))
        assert excinfo.value.code == "INVALID_PARTITION"

    def test_partition_cells_must_be_disjoint_and_known(self, process):
        overlapping = (
            frozenset(FAQ_MEMBERS) - {"anna.gates"},
            frozenset({"anna.gates", "john.smith"}),
        )
        with pytest.raises(EngineError) as excinfo:
            split_group(process, overlapping, child_ids=("a", "b"), child_group_ids=("ga", "gb"))
        assert excinfo.value.code == "INVALID_PARTITION"
        with_stranger = (frozenset(FAQ_MEMBERS) - {"anna.gates"}, frozenset({"anna.gates", "zed"}))
        with pytest.raises(EngineError) as excinfo:
            split_group(process, with_stranger, child_ids=("a", "b"), child_group_ids=("ga", "gb"))
        assert excinfo.value.code == "INVALID_PARTITION"

    def test_single_cell_is_not_a_split(self, process):
        with pytest.raises(EngineError) as excinfo:
            split_group(process, (frozenset(FAQ_MEMBERS),), child_ids=("a",), child_group_ids=("ga",))
        assert excinfo.value.code == "INVALID_PARTITION"

    def test_completed_processes_do_not_split(self, process, faq, executor):
        fire(process, faq, "john.smith", "t-ask-first", executor)
        fire(process, faq, "scott.tiger", "t-fail-answer", executor)
        with pytest.raises(EngineError) as excinfo:
            split_group(process, PARTITION, child_ids=("a", "b"), child_group_ids=("ga", "gb"))
        assert excinfo.value.code == "PROCESS_COMPLETED"

    def test_split_then_merge_restores_the_group(self, process, faq, executor):
        children = split_fixture(process, faq, executor)
        merged = merge_groups(children, process_id="p-merged", group_id="g-merged")
        assert merged.group.members == process.group.members
        assert merged.current_state == process.current_state
        assert merged.protocol_version == process.protocol_version
        assert [(e.seq, e.transition_id) for e in merged.history] == [
            (e.seq, e.transition_id) for e in process.history
        ]
        assert all(c.superseded for c in children)

    def test_merge_requires_same_state(self, process, faq, executor):
        left, right = split_fixture(process, faq, executor)
        fire(left, faq, "john.smith", "t-ask-next")
        with pytest.raises(EngineError) as excinfo:
            merge_groups([left, right], process_id="m", group_id="gm")
        assert excinfo.value.code == "STATE_MISMATCH"

    def test_merge_requires_same_version(self, faq, executor):
        other = apply_patch(
            faq,
            patch(AddTransition(Transition("t-extra", "q2", "q2", EXPERT, ActionSpec("Answer", "http://www.example.org/ws/answerQuestion")))),
        )
        a = instantiate(faq, faq_group("ga"), process_id="pa")
        b = instantiate(other, faq_group("gb"), process_id="pb")
        with pytest.raises(EngineError) as excinfo:
            merge_groups([a, b], process_id="m", group_id="gm")
        assert excinfo.value.code == "PROTOCOL_MISMATCH"

    def test_merge_refuses_retired_and_completed_inputs(self, process, faq, executor):
        left, right = split_fixture(process, faq, executor)
        with pytest.raises(EngineError) as excinfo:
            merge_groups([left, process], process_id="m", group_id="gm")
        assert excinfo.value.code == "PROCESS_RETIRED"
        fire(left, faq, "scott.tiger", "t-success")
        with pytest.raises(EngineError) as excinfo:
            merge_groups([left, right], process_id="m", group_id="gm")
        assert excinfo.value.code == "PROCESS_COMPLETED"

    def test_merge_unions_roles_per_collaborator(self, faq):
        a = instantiate(
            faq,
            Group(group_id="ga", members={"ada": frozenset({NORMAL_USER}), "ben": frozenset({EXPERT})}),
            process_id="pa",
        )
        b = instantiate(
            faq,
            Group(group_id="gb", members={"ada": frozenset({MANAGER})}),
            process_id="pb",
        )
        merged = merge_groups([a, b], process_id="m", group_id="gm")
        assert merged.group.members["ada"] == frozenset({NORMAL_USER, MANAGER})
        assert merged.group.members["ben"] == frozenset({EXPERT})

    @settings(max_examples=120, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_conservation_of_collaborator_role_pairs(self, seed):
        rng = random.Random(seed)
        protocol = random_implemented_protocol(rng, max_states=8)
        group = random_group(rng, protocol)
        starts = sorted(protocol.start_ids())
        process = instantiate(
            protocol, group, process_id="p", start_state=starts[0] if len(starts) > 1 else None
        )
        members = sorted(group.members)
        if len(members) < 2:
            return
        cut = rng.randint(1, len(members) - 1)
        rng.shuffle(members)
        partition = (frozenset(members[:cut]), frozenset(members[cut:]))
        children = split_group(process, partition, child_ids=("c1", "c2"), child_group_ids=("g1", "g2"))
        parent_pairs = {(m, r) for m, roles in group.members.items() for r in roles}
        child_pairs = {
            (m, r) for c in children for m, roles in c.group.members.items() for r in roles
        }
        assert child_pairs == parent_pairs
        merged = merge_groups(children, process_id="m", group_id="gm")
        merged_pairs = {(m, r) for m, roles in merged.group.members.items() for r in roles}
        assert merged_pairs == parent_pairs


# ---------------------------------------------------------------------------
# migrate
# ---------------------------------------------------------------------------


def adapted(faq):
    return apply_patch(
        faq,
        patch(
            AddTransition(Transition("t-c1", "q2", "q2", EXPERT, ActionSpec("comment", "http://www.example.org/ws/commentAnswer"))),
            AddTransition(Transition("t-c2", "q2", "q2", NORMAL_USER, ActionSpec("comment", "http://www.example.org/ws/commentAnswer"))),
        ),
    )


class TestMigrate:
    def test_additive_migration_succeeds(self, process, faq, executor):
        fire(process, faq, "john.smith", "t-ask-first", executor)
        fire(process, faq, "jennifer.scott", "t-answer", executor)
        target = adapted(faq)
        assert migrate(process, target, now=T0) is None
        assert process.protocol_version == target.version
        assert process.current_state == "q2"
        marker = process.history[-1]
        assert marker.transition_id is None
        assert marker.action_result == {"from_version": faq.version, "to_version": target.version}
        assert "t-c1" in {t.id for t in available_transitions(process, target, "bill.bogard")}

    def test_missing_state_is_a_conflict(self, process, faq):
        target = apply_patch(
            faq,
            patch(
                RemoveTransition("t-ask-first"),
                RemoveState("q0"),
            ),
        )
        # process still waits at q0
        conflict = migrate(process, target, now=T0)
        assert conflict is not None and "q0" in conflict
        assert process.protocol_version == faq.version
        assert process.history == []

    def test_unreachable_end_is_a_conflict(self, process, faq, executor):
        fire(process, faq, "john.smith", "t-ask-first", executor)
        # strand q1: its only exits vanish
        target = apply_patch(
            faq,
            patch(
                RemoveTransition("t-answer"),
                RemoveTransition("t-remove"),
                RemoveTransition("t-fail-answer"),
            ),
        )
        assert migration_conflict(process, target) is not None
        assert migrate(process, target, now=T0) is not None
        assert process.protocol_version == faq.version

    def test_completed_and_retired_processes_do_not_migrate(self, process, faq, executor):
        retired_children = split_group(
            process, PARTITION, child_ids=("a", "b"), child_group_ids=("ga", "gb")
        )
        with pytest.raises(EngineError) as excinfo:
            migrate(process, adapted(faq), now=T0)
        assert excinfo.value.code == "PROCESS_RETIRED"
        child = retired_children[0]
        fire(child, faq, "john.smith", "t-ask-first")
        fire(child, faq, "scott.tiger", "t-fail-answer")
        with pytest.raises(EngineError) as excinfo:
            migrate(child, adapted(faq), now=T0)
        assert excinfo.value.code == "PROCESS_COMPLETED"

    def test_target_must_be_implemented(self, process):
        with pytest.raises(EngineError) as excinfo:
            migrate(process, faq_abstract(), now=T0)
        assert excinfo.value.code == "NOT_IMPLEMENTED_PROTOCOL"

    def test_conflicted_migration_changes_nothing(self, process, faq, executor):
        fire(process, faq, "john.smith", "t-ask-first", executor)
        before = (
            process.current_state,
            process.protocol_version,
            [e.seq for e in process.history],
            process.status,
        )
        target = apply_patch(faq, patch(RemoveTransition("t-ask-first")))
        # q0 is now unreachable in the target, but the process sits at q1; make
        # the conflict about q1 instead by stranding it.
        target = apply_patch(
            target,
            patch(RemoveTransition("t-answer"), RemoveTransition("t-remove"), RemoveTransition("t-fail-answer")),
        )
        assert migrate(process, target, now=T0) is not None
        after = (
            process.current_state,
            process.protocol_version,
            [e.seq for e in process.history],
            process.status,
        )
        assert after == before
