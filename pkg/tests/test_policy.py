import pytest

from absgate import parse_policy, policy_hash, validate_policy
from absgate.condition import Comparison, Literal
from absgate.model import FieldKind, FieldValue
from absgate.policy import (
    ClassDecl,
    ClinicalRule,
    ExclusionRule,
    FieldDecl,
    Policy,
    StewardshipSpec,
    StewardshipVeto,
    policy_canonical,
)

MINIMAL = """\
policy p version v1
field a : bool
class c1 rank 1
rule r1 when a == true candidate c1
stewardship {
  escalation_justified_when false
}
"""


def _base(**overrides):
    kwargs = dict(
        policy_id="p",
        version="v1",
        schema=(FieldDecl("a", FieldKind.BOOLEAN),),
        classes=(ClassDecl("c1", 1),),
        stewardship=StewardshipSpec(Literal(True)),
        clinical_rules=(ClinicalRule("r1", Comparison("a", "==", FieldValue.boolean(True)), "c1"),),
    )
    kwargs.update(overrides)
    return Policy(**kwargs)


def test_field_decl_invariants():
    with pytest.raises(ValueError):
        FieldDecl("a", FieldKind.TOKEN, enum=())
    with pytest.raises(ValueError):
        FieldDecl("a", FieldKind.BOOLEAN, is_risk=True)
    with pytest.raises(ValueError):
        FieldDecl("a", FieldKind.TOKEN_SET, enum=("x",), is_risk=True)
    assert FieldDecl("a", FieldKind.TOKEN_SET, is_risk=True).is_risk


def test_class_decl_requires_positive_rank():
    with pytest.raises(ValueError):
        ClassDecl("c1", 0)


def test_policy_rejects_duplicate_declarations():
    with pytest.raises(ValueError):
        _base(schema=(FieldDecl("a", FieldKind.BOOLEAN), FieldDecl("a", FieldKind.INTEGER)))
    with pytest.raises(ValueError):
        _base(classes=(ClassDecl("c1", 1), ClassDecl("c1", 2)))
    with pytest.raises(ValueError):
        _base(
            exclusions=(
                ExclusionRule("e1", "L", Literal(True)),
                ExclusionRule("e2", "L", Literal(False)),
            )
        )


def test_policy_rejects_rule_id_reuse_across_sections():
    with pytest.raises(ValueError):
        _base(
            stewardship=StewardshipSpec(
                Literal(True),
                (StewardshipVeto("r1", "c1", Literal(False)),),
            )
        )


def test_policy_rejects_dangling_references():
    with pytest.raises(ValueError):
        _base(clinical_rules=(ClinicalRule("r1", Literal(True), "ghost"),))
    with pytest.raises(ValueError):
        _base(required=("ghost",))
    with pytest.raises(ValueError):
        _base(
            clinical_rules=(
                ClinicalRule("r1", Literal(True), "c1", incompatible_with=("ghost",)),
            )
        )
    with pytest.raises(ValueError):
        _base(
            clinical_rules=(
                ClinicalRule("r1", Literal(True), "c1", incompatible_with=("r1",)),
            )
        )


@pytest.mark.parametrize(
    ("mutation", "code", "severity"),
    [
        (lambda t: t.replace("rule r1 when", "rule any when"), "reserved_identifier", "error"),
        (
            lambda t: t.replace("class c1 rank 1\n", "class c1 rank 1\nclass no_candidate rank 2\n"),
            "reserved_identifier",
            "error",
        ),
        (
            lambda t: t.replace(
                "rule r1 when a == true candidate c1\n",
                "rule r1 when a == true candidate c1 incompatible r2\n"
                "rule r2 when a == false candidate c1\n",
            ),
            "asymmetric_incompatibility",
            "error",
        ),
        (
            lambda t: t.replace("class c1 rank 1", "class c1 rank 1 escalation"),
            "unjustifiable_escalation_class",
            "error",
        ),
        (
            lambda t: t.replace(
                "rule r1 when a == true candidate c1\n",
                "consistency x1 forbid (a == true)\nrule r1 when a == true candidate c1\n",
            ),
            "unreachable_rule",
            "warning",
        ),
        (
            lambda t: t.replace("field a : bool\n", "field a : bool\nfield rf : tokenset risk\n"),
            "empty_known_risks",
            "warning",
        ),
    ],
)
def test_validate_policy_semantic_checks(mutation, code, severity):
    policy, diags = parse_policy(mutation(MINIMAL))
    assert policy is not None and diags == []
    findings = validate_policy(policy)
    matched = [d for d in findings if d.code == code]
    assert matched, [d.render() for d in findings]
    assert all(d.severity.value == severity for d in matched)


def test_validate_policy_passes_clean_text():
    policy, _ = parse_policy(MINIMAL)
    assert policy is not None
    assert validate_policy(policy) == []


def test_escalation_with_real_justification_is_not_flagged():
    text = MINIMAL.replace("class c1 rank 1", "class c1 rank 1 escalation").replace(
        "escalation_justified_when false", "escalation_justified_when a == true"
    )
    policy, diags = parse_policy(text)
    assert policy is not None and diags == []
    assert validate_policy(policy) == []


def test_canonical_form_sorts_declarations():
    policy, _ = parse_policy(
        MINIMAL.replace("field a : bool\n", "field z : int\nfield a : bool\n")
    )
    assert policy is not None
    doc = policy_canonical(policy)
    assert [entry["name"] for entry in doc["fields"]] == ["a", "z"]
    assert doc["policy"] == "p"
    assert doc["version"] == "v1"


def test_hash_is_pure_and_content_addressed():
    policy, _ = parse_policy(MINIMAL)
    again, _ = parse_policy(MINIMAL)
    assert policy is not None and again is not None
    assert policy_hash(policy) == policy_hash(again)
    assert len(policy_hash(policy)) == 64
    renamed, _ = parse_policy(MINIMAL.replace("policy p ", "policy q "))
    assert renamed is not None
    assert policy_hash(renamed) != policy_hash(policy)
