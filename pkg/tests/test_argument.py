import pytest

from gsn_conform.argument import (
    ArgumentGraph,
    CycleIntroduced,
    DuplicateId,
    ElementKind,
    EvidenceKind,
    EvidenceRef,
    GsnElement,
    InvalidElement,
    KindViolation,
    RelationKind,
    Relationship,
    Severity,
    UnknownId,
    add_element,
    add_relationship,
    ancestors,
    subtree,
    support_cycles,
    well_formed,
)

K = ElementKind
SB, IC, CH = RelationKind.SUPPORTED_BY, RelationKind.IN_CONTEXT_OF, RelationKind.CHALLENGES


def _codes(findings):
    return [f.code for f in findings]


def _small():
    g = ArgumentGraph()
    for eid, kind in [("G1", K.GOAL), ("S1", K.STRATEGY), ("G2", K.GOAL), ("C1", K.CONTEXT)]:
        g = add_element(g, GsnElement(eid, kind, f"statement {eid}", undeveloped=(eid == "G2")))
    g = add_relationship(g, Relationship(SB, "G1", "S1"))
    g = add_relationship(g, Relationship(SB, "S1", "G2"))
    return add_relationship(g, Relationship(IC, "G1", "C1"))


class TestElements:
    def test_statement_required(self):
        with pytest.raises(InvalidElement):
            GsnElement("G1", K.GOAL, "   ")

    def test_bad_id(self):
        with pytest.raises(InvalidElement):
            GsnElement("G-1", K.GOAL, "x")

    def test_only_goals_and_strategies_can_be_undeveloped(self):
        GsnElement("S1", K.STRATEGY, "x", undeveloped=True)
        with pytest.raises(InvalidElement):
            GsnElement("C1", K.CONTEXT, "x", undeveloped=True)

    def test_evidence_only_on_solutions(self):
        ev = EvidenceRef("E1", EvidenceKind.AUDIT_REPORT, "a.pdf")
        GsnElement("Sn1", K.SOLUTION, "x", evidence=ev)
        with pytest.raises(InvalidElement):
            GsnElement("G1", K.GOAL, "x", evidence=ev)

    @pytest.mark.parametrize("digest", ["abc", "ABCDEF0123456789ABCDEF0123456789", "0" * 33, "g" * 32])
    def test_digest_rules(self, digest):
        with pytest.raises(InvalidElement):
            EvidenceRef("E1", "audit_report", "a.pdf", digest, "sha256")

    def test_digest_needs_algorithm(self):
        with pytest.raises(InvalidElement):
            EvidenceRef("E1", "audit_report", "a.pdf", "ab" * 16)
        assert EvidenceRef("E1", "audit_report", "a.pdf", "ab" * 16, "md5").algorithm == "md5"

    def test_annotations_are_frozen_sets(self):
        e = GsnElement("G1", K.GOAL, "x", annotations={"data_items": ["a", "b", "a"]})
        assert e.annotation("data_items") == frozenset({"a", "b"})
        assert e.annotation("purposes") == frozenset()
        with pytest.raises(TypeError):
            e.annotations["x"] = frozenset({"y"})


class TestConstruction:
    def test_duplicate_id(self):
        g = add_element(ArgumentGraph(), GsnElement("G1", K.GOAL, "x"))
        with pytest.raises(DuplicateId):
            add_element(g, GsnElement("G1", K.GOAL, "y"))

    def test_unknown_endpoint(self):
        g = add_element(ArgumentGraph(), GsnElement("G1", K.GOAL, "x"))
        with pytest.raises(UnknownId) as info:
            add_relationship(g, Relationship(SB, "G1", "G2"))
        assert info.value.element_id == "G2"

    @pytest.mark.parametrize(
        "kind, src, tgt",
        [
            (SB, "C1", "G2"),  # context supports nothing
            (SB, "G1", "C1"),  # context cannot support
            (IC, "G1", "G2"),  # goal is not contextual
            (CH, "G1", "G2"),  # only challenges challenge
            (SB, "G1", "G1"),  # self edge
        ],
    )
    def test_kind_rules(self, kind, src, tgt):
        g = _small()
        with pytest.raises(KindViolation):
            add_relationship(g, Relationship(kind, src, tgt))

    def test_strategy_cannot_support_strategy(self):
        g = add_element(_small(), GsnElement("S2", K.STRATEGY, "x"))
        with pytest.raises(KindViolation):
            add_relationship(g, Relationship(SB, "S1", "S2"))

    def test_cycle_reports_path(self):
        g = _small()
        with pytest.raises(CycleIntroduced) as info:
            add_relationship(g, Relationship(SB, "G2", "G1"))
        assert info.value.cycle[0] == "G1" and info.value.cycle[-1] == "G2"
        assert add_relationship(g, Relationship(SB, "G1", "G2")) is not g

    def test_failed_call_leaves_graph_unchanged(self):
        g = _small()
        before = (dict(g.elements), g.relationships)
        for bad in (Relationship(SB, "G2", "G1"), Relationship(SB, "G1", "X9")):
            with pytest.raises(Exception):
                add_relationship(g, bad)
        assert (dict(g.elements), g.relationships) == before

    def test_duplicate_relationship_is_noop(self):
        g = _small()
        assert add_relationship(g, Relationship(SB, "G1", "S1")) is g

    def test_equality_ignores_insertion_order(self):
        a = _small()
        b = ArgumentGraph(reversed(list(a.elements.values())), reversed(a.relationships))
        assert a == b


class TestQueries:
    def test_fixture_ancestors(self, minimisation):
        assert ancestors(minimisation, "G8") == ("G5", "S2", "G2", "S1", "G1")
        assert ancestors(minimisation, "G7") == ("S2", "G2", "S1", "G1")
        assert ancestors(minimisation, "G1") == ()

    def test_fixture_subtree(self, minimisation):
        assert subtree(minimisation, "G2") == ("G2", "C5", "S2", "C6", "G5", "G6", "G7", "G8", "G9", "Sn1", "Sn2")
        assert set(subtree(minimisation, "G1")) == set(minimisation.elements)
        assert subtree(minimisation, "Sn1") == ("Sn1",)

    def test_unknown_id(self, minimisation):
        with pytest.raises(UnknownId):
            ancestors(minimisation, "G99")

    def test_top_goals(self, minimisation):
        assert minimisation.top_goals() == ["G1"]


class TestWellFormed:
    def test_fixture_clean(self, minimisation):
        assert well_formed(minimisation) == []

    def test_solution_without_evidence(self):
        g = ArgumentGraph(
            [GsnElement("G1", K.GOAL, "x"), GsnElement("Sn1", K.SOLUTION, "y")],
            [Relationship(SB, "G1", "Sn1")],
        )
        assert _codes(well_formed(g)) == ["SOLUTION_NO_EVIDENCE"]

    def test_errors_for_raw_graphs(self):
        g = ArgumentGraph(
            [GsnElement("G1", K.GOAL, "x"), GsnElement("G2", K.GOAL, "y"), GsnElement("C1", K.CONTEXT, "c")],
            [
                Relationship(SB, "G1", "G2"),
                Relationship(SB, "G2", "G1"),
                Relationship(SB, "G1", "G3"),
                Relationship(IC, "C1", "G1"),
            ],
        )
        codes = _codes(well_formed(g))
        for code in ("SUPPORT_CYCLE", "DANGLING_REFERENCE", "KIND_VIOLATION", "NO_TOP_GOAL", "UNUSED_CONTEXT"):
            assert code in codes

    def test_warnings(self):
        g = ArgumentGraph(
            [
                GsnElement("G1", K.GOAL, "x", annotations={"colour": ["blue"]}),
                GsnElement("S1", K.STRATEGY, "s"),
                GsnElement("G2", K.GOAL, "y"),
                GsnElement("A1", K.ASSUMPTION, "a"),
                GsnElement("CG1", K.CHALLENGE, "c"),
                GsnElement("X1", K.GOAL, "prefix", undeveloped=True),
            ],
            [Relationship(SB, "G1", "S1"), Relationship(SB, "G1", "G2"), Relationship(IC, "G1", "A1")],
        )
        findings = well_formed(g)
        assert all(f.severity is Severity.WARNING for f in findings)
        assert set(_codes(findings)) == {
            "UNKNOWN_ANNOTATION_KEY",
            "STRATEGY_NO_SUBGOALS",
            "UNDEVELOPED_UNMARKED",
            "DETACHED_CHALLENGE",
        }

    def test_prefix_mismatch(self):
        g = ArgumentGraph([GsnElement("S1", K.GOAL, "x", undeveloped=True)])
        assert _codes(well_formed(g)) == ["ID_PREFIX_MISMATCH"]

    def test_empty_graph_has_no_findings(self):
        assert well_formed(ArgumentGraph()) == []

    def test_support_cycles_lists_components(self):
        g = ArgumentGraph(
            [GsnElement(f"G{i}", K.GOAL, "x") for i in range(1, 5)],
            [Relationship(SB, "G1", "G2"), Relationship(SB, "G2", "G3"), Relationship(SB, "G3", "G2")],
        )
        assert support_cycles(g) == [["G2", "G3"]]
