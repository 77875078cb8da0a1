"""Version repository, lineage, the three propagation strategies and
privacy-aware cross-team history."""

from __future__ import annotations

import json
import random

import pytest

from socialproto import (
    ActionSpec,
    AddState,
    AddTransition,
    AdoptionOutcome,
    CatalogScope,
    EngineError,
    LineageEdge,
    MockActionExecutor,
    PVCState,
    PrivateScope,
    PropagationStrategy,
    RefinementLevel,
    RemoveState,
    RemoveTransition,
    RoleBinding,
    SessionStatus,
    StateKind,
    StateNode,
    Transition,
    VoteValue,
    adopt_cross_environment,
    cast_vote,
    catalog_for,
    close_negotiation,
    derive_version,
    extract_abstract,
    instantiate,
    lineage,
    make_protocol,
    migrate,
    open_negotiation,
    patch,
    propagate,
    query_history,
    record_history,
    refinement_level,
    register_protocol,
    serialize_state,
    structurally_equal,
    trigger,
    validate_structure,
)
from socialproto.fixtures import (
    COMMENT_ACTION,
    COMMENT_ENDPOINT,
    EXPERT,
    FAQ_MEMBERS,
    NORMAL_USER,
    faq_environment,
    faq_environment_alt_comment,
    faq_environment_no_comment,
    faq_group,
    faq_implemented,
    faq_role_bindings,
)
from socialproto.inheritance import ProtocolRepository

from support import random_valid_protocol

T0 = "2026-01-01T00:00:00+00:00"


def review_protocol():
    """Tiny second catalog entry, unrelated to the FAQ."""
    return make_protocol(
        protocol_id="review",
        states=[
            StateNode("r0", StateKind.START, "Draft submitted"),
            StateNode("r1", StateKind.END, "Published", outcome="success"),
        ],
        transitions=[
            Transition("t-publish", "r0", "r1", "Editor", ActionSpec("publish", "http://svc.test/publish"))
        ],
        roles=["Editor"],
        role_bindings=[RoleBinding("Editor", frozenset({"ed.one"}))],
    )


def comment_patch():
    return patch(
        AddTransition(
            Transition("t-comment-expert", "q2", "q2", EXPERT, ActionSpec(COMMENT_ACTION, COMMENT_ENDPOINT))
        ),
        AddTransition(
            Transition("t-comment-user", "q2", "q2", NORMAL_USER, ActionSpec(COMMENT_ACTION, COMMENT_ENDPOINT))
        ),
    )


def start_swap_patch():
    """Valid on its own, but strands any process still waiting at q0."""
    return patch(
        RemoveTransition("t-ask-first"),
        RemoveState("q0"),
        AddState(StateNode("p0", StateKind.START, "Collecting the first question")),
        AddTransition(
            Transition("t-open", "p0", "q1", NORMAL_USER, ActionSpec("Ask question", "http://www.example.org/ws/askQuestion"))
        ),
    )


def community():
    """Two catalogued protocols, three groups, groups A and B each running the FAQ."""
    pvc = PVCState()
    pvc.environments["env-main"] = faq_environment()
    p1 = faq_implemented()
    p2 = review_protocol()
    register_protocol(pvc.repository, p1, CatalogScope())
    register_protocol(pvc.repository, p2, CatalogScope())
    for gid in ("grp-a", "grp-b", "grp-c"):
        pvc.groups[gid] = faq_group(group_id=gid)
    pvc.processes["proc-a"] = instantiate(p1, pvc.groups["grp-a"], process_id="proc-a")
    pvc.processes["proc-b"] = instantiate(p1, pvc.groups["grp-b"], process_id="proc-b")
    return pvc, p1, p2


def derive_comment_variant(pvc, p1):
    variant = derive_version(
        pvc.repository, p1.version, comment_patch(), group_id="grp-a", negotiation_ref="neg-1"
    )
    # group A moves its own process as part of accepting the adaptation
    assert migrate(pvc.processes["proc-a"], variant, now=T0) is None
    return variant


class TestRepository:
    def test_registration_is_idempotent(self):
        repo = ProtocolRepository()
        p1 = faq_implemented()
        assert register_protocol(repo, p1, CatalogScope()) == p1.version
        assert register_protocol(repo, p1, PrivateScope(group_id="grp-x")) == p1.version
        assert len(repo.versions) == 1
        # first registration wins the scope
        assert isinstance(repo.visibility[p1.version], CatalogScope)

    def test_invalid_protocols_are_refused(self):
        repo = ProtocolRepository()
        broken = make_protocol(
            protocol_id="broken",
            states=[StateNode("s0", StateKind.START, "start")],
            transitions=[],
            roles=[],
        )
        with pytest.raises(EngineError) as excinfo:
            register_protocol(repo, broken, CatalogScope())
        assert excinfo.value.code == "INVALID_PROTOCOL"
        assert "NO_END_STATE" in excinfo.value.details["findings"]
        assert broken.version not in repo.versions

    def test_unknown_version_lookup(self):
        repo = ProtocolRepository()
        with pytest.raises(EngineError) as excinfo:
            repo.get("ffffffffffffffff")
        assert excinfo.value.code == "UNKNOWN_VERSION"


class TestDerive:
    def test_derivation_registers_a_private_child(self):
        repo = ProtocolRepository()
        p1 = faq_implemented()
        register_protocol(repo, p1, CatalogScope())
        child = derive_version(repo, p1.version, comment_patch(), group_id="grp-a", negotiation_ref="neg-9")
        assert child.parent_version == p1.version
        assert repo.visibility[child.version] == PrivateScope(group_id="grp-a")
        edge = repo.edges[child.version]
        assert edge.parent == p1.version
        assert edge.negotiation_ref == "neg-9"

    def test_unknown_parent(self):
        repo = ProtocolRepository()
        with pytest.raises(EngineError) as excinfo:
            derive_version(repo, "ffffffffffffffff", comment_patch(), group_id="grp-a")
        assert excinfo.value.code == "UNKNOWN_VERSION"

    def test_inapplicable_patch(self):
        repo = ProtocolRepository()
        p1 = faq_implemented()
        register_protocol(repo, p1, CatalogScope())
        with pytest.raises(EngineError) as excinfo:
            derive_version(repo, p1.version, patch(RemoveTransition("t-ghost")), group_id="grp-a")
        assert excinfo.value.code == "ADAPTATION_INVALID"

    def test_patch_yielding_invalid_protocol(self):
        repo = ProtocolRepository()
        p1 = faq_implemented()
        register_protocol(repo, p1, CatalogScope())
        strand = patch(RemoveTransition("t-success"), RemoveTransition("t-fail-next"))
        with pytest.raises(EngineError) as excinfo:
            derive_version(repo, p1.version, strand, group_id="grp-a")
        assert excinfo.value.code == "ADAPTATION_INVALID"
        # qS loses its only inbound transition
        assert "UNREACHABLE_STATE" in excinfo.value.details["findings"]

    def test_rederivation_reuses_the_version(self):
        repo = ProtocolRepository()
        p1 = faq_implemented()
        register_protocol(repo, p1, CatalogScope())
        a = derive_version(repo, p1.version, comment_patch(), group_id="grp-a")
        b = derive_version(repo, p1.version, comment_patch(), group_id="grp-b")
        assert a.version == b.version
        assert repo.visibility[a.version] == PrivateScope(group_id="grp-a")


class TestLineage:
    def test_chain_to_the_root(self):
        repo = ProtocolRepository()
        p1 = faq_implemented()
        register_protocol(repo, p1, CatalogScope())
        child = derive_version(repo, p1.version, comment_patch(), group_id="grp-a", negotiation_ref="neg-1")
        extra = patch(
            AddTransition(
                Transition("t-comment-mgr", "q2", "q2", "Manager", ActionSpec(COMMENT_ACTION, COMMENT_ENDPOINT))
            )
        )
        grandchild = derive_version(repo, child.version, extra, group_id="grp-a", negotiation_ref="neg-2")
        hops = lineage(repo, grandchild.version)
        assert [h.version for h in hops] == [grandchild.version, child.version, p1.version]
        assert [h.negotiation_ref for h in hops] == ["neg-2", "neg-1", None]
        assert hops[-1].parent is None

    def test_cycles_are_reported_not_looped(self):
        repo = ProtocolRepository()
        p1 = faq_implemented()
        register_protocol(repo, p1, CatalogScope())
        child = derive_version(repo, p1.version, comment_patch(), group_id="grp-a")
        repo.edges[p1.version] = LineageEdge(child=p1.version, parent=child.version)
        with pytest.raises(EngineError) as excinfo:
            lineage(repo, child.version)
        assert excinfo.value.code == "LINEAGE_CYCLE"

    def test_lineage_is_acyclic_for_honest_derivations(self):
        rng = random.Random(7)
        repo = ProtocolRepository()
        root = faq_implemented()
        register_protocol(repo, root, CatalogScope())
        current = root
        for i in range(6):
            extra = patch(
                AddTransition(
                    Transition(
                        f"t-loop-{i}", "q2", "q2", rng.choice([EXPERT, NORMAL_USER]),
                        ActionSpec(COMMENT_ACTION, COMMENT_ENDPOINT),
                    )
                )
            )
            current = derive_version(repo, current.version, extra, group_id="grp-a")
        hops = lineage(repo, current.version)
        assert len(hops) == len({h.version for h in hops})
        assert hops[-1].version == root.version


class TestPropagateLocal:
    def test_local_keeps_the_version_private(self):
        pvc, p1, p2 = community()
        variant = derive_comment_variant(pvc, p1)
        report = propagate(pvc, variant.version, PropagationStrategy.LOCAL, now=T0)
        assert report.applied and report.replaced_version is None
        assert pvc.repository.visibility[variant.version] == PrivateScope(group_id="grp-a")
        # the outside world is unchanged
        assert {e.version for e in catalog_for(pvc, "grp-c")} == {p1.version, p2.version}
        assert pvc.processes["proc-a"].protocol_version == variant.version
        assert pvc.processes["proc-b"].protocol_version == p1.version

    def test_local_does_not_consume_the_decision(self):
        pvc, p1, _ = community()
        variant = derive_comment_variant(pvc, p1)
        propagate(pvc, variant.version, PropagationStrategy.LOCAL, now=T0)
        report = propagate(pvc, variant.version, PropagationStrategy.GLOBAL, now=T0)
        assert report.applied
        assert isinstance(pvc.repository.visibility[variant.version], CatalogScope)


class TestPropagateGlobal:
    def test_global_publishes_without_touching_processes(self):
        pvc, p1, p2 = community()
        variant = derive_comment_variant(pvc, p1)
        report = propagate(pvc, variant.version, PropagationStrategy.GLOBAL, now=T0)
        assert report.applied and report.replaced_version is None
        assert {e.version for e in catalog_for(pvc, "grp-c")} == {p1.version, p2.version, variant.version}
        assert pvc.processes["proc-b"].protocol_version == p1.version

    def test_publication_is_one_shot(self):
        pvc, p1, _ = community()
        variant = derive_comment_variant(pvc, p1)
        propagate(pvc, variant.version, PropagationStrategy.GLOBAL, now=T0)
        with pytest.raises(EngineError) as excinfo:
            propagate(pvc, variant.version, PropagationStrategy.INSTANT, now=T0)
        assert excinfo.value.code == "NOT_PRIVATE"

    def test_catalogued_versions_cannot_be_propagated(self):
        pvc, p1, _ = community()
        with pytest.raises(EngineError) as excinfo:
            propagate(pvc, p1.version, PropagationStrategy.GLOBAL, now=T0)
        assert excinfo.value.code == "NOT_PRIVATE"

    def test_roots_have_nothing_to_replace(self):
        pvc = PVCState()
        orphan = faq_implemented()
        register_protocol(pvc.repository, orphan, PrivateScope(group_id="grp-a"))
        with pytest.raises(EngineError) as excinfo:
            propagate(pvc, orphan.version, PropagationStrategy.INSTANT, now=T0)
        assert excinfo.value.code == "NO_PARENT"


class TestPropagateInstant:
    def test_instant_replaces_the_parent_everywhere(self):
        pvc, p1, p2 = community()
        variant = derive_comment_variant(pvc, p1)
        report = propagate(pvc, variant.version, PropagationStrategy.INSTANT, now=T0)
        assert report.applied
        assert report.replaced_version == p1.version
        assert report.migrated == ("proc-b",)
        assert pvc.processes["proc-b"].protocol_version == variant.version
        assert p1.version in pvc.repository.tombstones
        assert {e.version for e in catalog_for(pvc, "grp-c")} == {variant.version, p2.version}
        # the replaced version itself is still resolvable for lineage purposes
        assert pvc.repository.get(p1.version) is not None

    def test_completed_processes_are_skipped(self, executor):
        pvc, p1, _ = community()
        proc_b = pvc.processes["proc-b"]
        trigger(proc_b, p1, "john.smith", "t-ask-first", executor=executor, now=T0)
        trigger(proc_b, p1, "scott.tiger", "t-fail-answer", executor=executor, now=T0)
        variant = derive_comment_variant(pvc, p1)
        report = propagate(pvc, variant.version, PropagationStrategy.INSTANT, now=T0)
        assert report.applied
        assert report.skipped == ("proc-b",)
        assert report.migrated == ()
        assert proc_b.protocol_version == p1.version

    def test_open_sessions_on_the_replaced_version_are_withdrawn(self):
        pvc, p1, _ = community()
        session = open_negotiation(
            pvc.processes["proc-b"], "bill.bogard", comment_patch(), session_id="neg-b", proposal_id="p1"
        )
        pvc.sessions["neg-b"] = session
        variant = derive_comment_variant(pvc, p1)
        report = propagate(pvc, variant.version, PropagationStrategy.INSTANT, now=T0)
        assert report.withdrawn_sessions == ("neg-b",)
        assert session.status is SessionStatus.WITHDRAWN

    def test_one_conflict_aborts_everything(self):
        pvc, p1, _ = community()
        variant = derive_version(
            pvc.repository, p1.version, start_swap_patch(), group_id="grp-a", negotiation_ref="neg-1"
        )
        before = serialize_state(pvc)
        report = propagate(pvc, variant.version, PropagationStrategy.INSTANT, now=T0)
        assert not report.applied
        assert len(report.conflicts) >= 1
        assert {pid for pid, _ in report.conflicts} == {"proc-a", "proc-b"}
        assert all("q0" in reason for _, reason in report.conflicts)
        assert serialize_state(pvc) == before
        assert pvc.repository.visibility[variant.version] == PrivateScope(group_id="grp-a")
        assert p1.version not in pvc.repository.tombstones

    def test_conflict_report_even_with_one_clean_process(self, executor):
        pvc, p1, _ = community()
        proc_a = pvc.processes["proc-a"]
        trigger(proc_a, p1, "john.smith", "t-ask-first", executor=executor, now=T0)
        variant = derive_version(pvc.repository, p1.version, start_swap_patch(), group_id="grp-a")
        report = propagate(pvc, variant.version, PropagationStrategy.INSTANT, now=T0)
        # proc-a at q1 would migrate fine; proc-b at q0 cannot, so nobody moves
        assert not report.applied
        assert {pid for pid, _ in report.conflicts} == {"proc-b"}
        assert proc_a.protocol_version == p1.version
        assert proc_b_version(pvc) == p1.version


def proc_b_version(pvc):
    return pvc.processes["proc-b"].protocol_version


class TestCatalog:
    def test_private_versions_are_invisible_to_other_groups(self):
        pvc, p1, p2 = community()
        variant = derive_comment_variant(pvc, p1)
        assert {e.version for e in catalog_for(pvc, "grp-a")} == {p1.version, p2.version, variant.version}
        assert {e.version for e in catalog_for(pvc, "grp-b")} == {p1.version, p2.version}

    def test_unknown_group(self):
        pvc, _, _ = community()
        with pytest.raises(EngineError) as excinfo:
            catalog_for(pvc, "grp-ghost")
        assert excinfo.value.code == "UNKNOWN_GROUP"

    def test_entries_carry_compatibility_for_the_groups_environment(self):
        pvc, p1, _ = community()
        variant = derive_comment_variant(pvc, p1)
        propagate(pvc, variant.version, PropagationStrategy.GLOBAL, now=T0)
        pvc.environments["env-no-comment"] = faq_environment_no_comment()
        pvc.groups["grp-d"] = faq_group(group_id="grp-d", environment_ref="env-no-comment")
        by_version = {e.version: e for e in catalog_for(pvc, "grp-d")}
        assert by_version[p1.version].compatible is True
        assert by_version[variant.version].compatible is False
        assert by_version[variant.version].missing_actions == frozenset({COMMENT_ACTION})

    def test_groups_without_an_environment_get_no_verdict(self):
        pvc, p1, _ = community()
        pvc.groups["grp-e"] = faq_group(group_id="grp-e", environment_ref="env-nowhere")
        entries = {e.version: e for e in catalog_for(pvc, "grp-e")}
        assert entries[p1.version].compatible is None

    def test_refinement_annotation(self):
        pvc, p1, _ = community()
        sketch = extract_abstract(p1)
        register_protocol(pvc.repository, sketch, CatalogScope())
        by_version = {e.version: e for e in catalog_for(pvc, "grp-c")}
        assert by_version[p1.version].refinement is RefinementLevel.IMPLEMENTED
        assert by_version[sketch.version].refinement is RefinementLevel.ABSTRACT


class TestAdopt:
    def adopted_variant(self, repo):
        p1 = faq_implemented()
        register_protocol(repo, p1, CatalogScope())
        child = derive_version(repo, p1.version, comment_patch(), group_id="grp-a")
        return p1, child

    def test_missing_service_blocks_adoption(self):
        repo = ProtocolRepository()
        _, child = self.adopted_variant(repo)
        outcome = adopt_cross_environment(repo, child.version, faq_environment_no_comment())
        assert not outcome.adopted
        assert outcome.missing_actions == frozenset({COMMENT_ACTION})
        assert outcome.candidate is None

    def test_alternative_endpoint_is_bound(self):
        repo = ProtocolRepository()
        _, child = self.adopted_variant(repo)
        outcome = adopt_cross_environment(
            repo, child.version, faq_environment_alt_comment(), role_bindings=faq_role_bindings()
        )
        assert outcome.adopted
        candidate = outcome.candidate
        comment_bindings = {
            t.action.binding for t in candidate.transitions if t.action.name == COMMENT_ACTION
        }
        assert comment_bindings == {"http://alt.example.org/ws/commentAnswer"}
        assert refinement_level(candidate) is RefinementLevel.IMPLEMENTED
        assert candidate.parent_version == child.version
        assert structurally_equal(extract_abstract(candidate), extract_abstract(child))

    def test_explicit_endpoint_choices(self):
        repo = ProtocolRepository()
        p1, _ = self.adopted_variant(repo)
        env = faq_environment()
        outcome = adopt_cross_environment(
            repo, p1.version, env, action_choices={"Ask question": "http://www.example.org/ws/askQuestion"}
        )
        assert outcome.adopted
        with pytest.raises(EngineError) as excinfo:
            adopt_cross_environment(
                repo, p1.version, env, action_choices={"Ask question": "http://elsewhere.test/ask"}
            )
        assert excinfo.value.code == "BINDING_NOT_IN_ENVIRONMENT"

    def test_adoption_is_registerable(self):
        repo = ProtocolRepository()
        _, child = self.adopted_variant(repo)
        outcome = adopt_cross_environment(
            repo, child.version, faq_environment_alt_comment(), role_bindings=faq_role_bindings()
        )
        version = register_protocol(repo, outcome.candidate, PrivateScope(group_id="grp-z"))
        hops = lineage(repo, version)
        assert [h.version for h in hops][:2] == [version, child.version]


class TestQueryHistory:
    def negotiated_version(self, pvc, p1, consents):
        process = pvc.processes["proc-a"]
        session = open_negotiation(
            process, "bill.bogard", comment_patch(), "readers want to comment answers",
            session_id="neg-1", proposal_id="prop-1",
        )
        pvc.sessions["neg-1"] = session
        for member in sorted(session.participants):
            cast_vote(session, member, "prop-1", VoteValue.ACCEPT)
        outcome = close_negotiation(session, "bill.bogard", p1, process, now=T0)
        record = record_history(session, consents, now=T0)
        pvc.repository.history["neg-1"] = record
        return derive_version(
            pvc.repository, p1.version, comment_patch(), group_id="grp-a", negotiation_ref="neg-1"
        )

    def test_owner_team_sees_the_full_record(self):
        pvc, p1, _ = community()
        consents = {m: m != "jennifer.scott" for m in FAQ_MEMBERS}
        variant = self.negotiated_version(pvc, p1, consents)
        views = query_history(pvc.repository, variant.version, "grp-a")
        assert len(views) == 1
        assert "jennifer.scott" in json.dumps(views[0])

    def test_other_teams_see_redacted_views(self):
        pvc, p1, _ = community()
        consents = {m: m != "jennifer.scott" for m in FAQ_MEMBERS}
        variant = self.negotiated_version(pvc, p1, consents)
        views = query_history(pvc.repository, variant.version, "grp-b")
        assert len(views) == 1
        blob = json.dumps(views[0], sort_keys=True)
        assert "jennifer.scott" not in blob
        assert "bill.bogard" in blob

    def test_hops_without_records_are_silent(self):
        pvc, p1, _ = community()
        variant = derive_version(pvc.repository, p1.version, comment_patch(), group_id="grp-a")
        assert query_history(pvc.repository, variant.version, "grp-b") == []

    def test_unknown_version(self):
        pvc, _, _ = community()
        with pytest.raises(EngineError) as excinfo:
            query_history(pvc.repository, "ffffffffffffffff", "grp-a")
        assert excinfo.value.code == "UNKNOWN_VERSION"


class TestRandomizedRegistration:
    def test_generated_protocols_register_and_catalog(self):
        rng = random.Random(99)
        pvc = PVCState()
        pvc.groups["grp-x"] = faq_group(group_id="grp-x", environment_ref=None)
        versions = set()
        for i in range(25):
            protocol = random_valid_protocol(rng, protocol_id=f"gen-{i}")
            assert validate_structure(protocol).valid
            versions.add(register_protocol(pvc.repository, protocol, CatalogScope()))
        listed = {e.version for e in catalog_for(pvc, "grp-x")}
        assert versions <= listed
