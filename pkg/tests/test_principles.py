import pytest

from gsn_conform.argument import ArgumentGraph, GsnElement
from gsn_conform.principles import (
    ICO_DATA_MINIMISATION,
    PRINCIPLE_KEYS,
    NotAGoal,
    PrincipleMismatch,
    UnknownPrinciple,
    coverage,
    get_principle,
    get_template,
    list_principles,
)


def _golden(data_dir, name):
    rows = (data_dir / name).read_text(encoding="utf-8").splitlines()
    return dict(row.split("\t", 1) for row in rows)


def test_seven_principles_in_order():
    assert [p.key for p in list_principles()] == list(PRINCIPLE_KEYS)
    assert len(PRINCIPLE_KEYS) == 7


def test_excerpts_match_golden(data_dir):
    golden = _golden(data_dir, "uk_gdpr_principles.txt")
    assert set(golden) == set(PRINCIPLE_KEYS)
    for key, excerpt in golden.items():
        assert get_principle(key).statutory_excerpt == excerpt


def test_minimisation_anchors_match_golden(data_dir):
    golden = _golden(data_dir, "ico_data_minimisation.txt")
    template = get_template("data_minimisation")
    assert template.branch_keys == ("adequate", "relevant", "limited")
    for key in template.branch_keys:
        assert template.branch(key).interpretation_anchor == golden[key] == ICO_DATA_MINIMISATION[key]
    assert template.branch("adequate").sub_dimensions == ("data_subjects", "data_items", "data_values")


@pytest.mark.parametrize("key", [k for k in PRINCIPLE_KEYS if k != "data_minimisation"])
def test_stub_templates(key):
    template = get_template(key)
    assert template.branch_keys == (key,)


def test_unknown_key():
    with pytest.raises(UnknownPrinciple):
        get_template("fairness")
    with pytest.raises(KeyError):
        get_principle("fairness")


def test_fixture_coverage(minimisation):
    report = coverage(minimisation, "G1", get_template("data_minimisation"))
    assert report.complete
    assert dict(report.covered) == {"adequate": ("G2",), "relevant": ("G3",), "limited": ("G4",)}
    dims = dict(report.dimension_coverage["adequate"])
    assert dims == {"data_subjects": ("G5",), "data_items": ("G6",), "data_values": ("G7",)}
    assert report.missing == ()


def test_removing_a_branch_goal(minimisation):
    rels = [r for r in minimisation.relationships if "G3" not in (r.source, r.target)]
    pruned = ArgumentGraph([e for e in minimisation.elements.values() if e.id != "G3"], rels, minimisation.title)
    report = coverage(pruned, "G1", get_template("data_minimisation"))
    assert report.missing == ("relevant",)
    assert not report.complete


def test_extraneous_branch(minimisation):
    g4 = minimisation.get("G4")
    odd = GsnElement("G4", g4.kind, g4.statement, True, {"branch": {"proportionate"}})
    graph = minimisation.replace(elements=[*(e for e in minimisation.elements.values() if e.id != "G4"), odd])
    report = coverage(graph, "G1", get_template("data_minimisation"))
    assert report.extraneous == ("G4",)
    assert report.missing == ("limited",)


def test_coverage_errors(minimisation):
    with pytest.raises(NotAGoal):
        coverage(minimisation, "S1", get_template("data_minimisation"))
    with pytest.raises(PrincipleMismatch):
        coverage(minimisation, "G1", get_template("accuracy"))
