from __future__ import annotations

import json

import pytest

from theorembench.fixtures_data import fixture_text
from theorembench.templates import (
    DuplicateTemplateId,
    MalformedDocument,
    MetaTemplate,
    MissingField,
    OutputKind,
    UnknownOutputKind,
    dump_templates,
    error_findings,
    extract_placeholders,
    load_templates,
    parse_meta_template,
    serialize_meta_template,
    template_to_payload,
    validate_template,
)


def minimal_payload(**overrides):
    payload = {
        "template_id": "unit_test_template_001",
        "target_paper_module": "Closed form under test",
        "core_math_concept": "n squared",
        "param_definition": [
            {
                "var_name": "n",
                "var_type": "Integer",
                "var_constraint": "n in [2, 3, 5]",
                "var_source": "pool",
            }
        ],
        "problem_template": "Compute ${n}^2$ for n = {n}.",
        "output_type": "Integer",
        "param_generation_rule": ["Step1: pick n."],
        "natural_lang_solution": "Square {n}.",
        "formal_solution": "n = {n}\n\nresult = n * n\n\nprint(result)",
        "validation_rule": [
            {"type": "param_check", "rule": "n in [2, 3, 5]"},
            {"type": "execution_check", "rule": "formal_solution executes without error"},
            {"type": "value_check", "rule": "result > 0"},
        ],
    }
    payload.update(overrides)
    return payload


def test_parse_minimal():
    t = parse_meta_template(minimal_payload())
    assert t.template_id == "unit_test_template_001"
    assert t.output_type is OutputKind.INTEGER
    assert [p.var_name for p in t.param_definitions] == ["n"]
    assert [r.kind for r in t.validation_rules] == ["param_check", "execution_check", "value_check"]


def test_parse_accepts_json_text_and_singleton_list():
    payload = minimal_payload()
    from_text = parse_meta_template(json.dumps(payload))
    from_list = parse_meta_template(json.dumps([payload]))
    assert from_text == from_list


def test_output_kinds():
    assert parse_meta_template(minimal_payload(output_type="Real")).output_type is OutputKind.REAL
    t = parse_meta_template(minimal_payload(output_type="Expression"))
    assert t.output_type is OutputKind.EXPRESSION
    with pytest.raises(UnknownOutputKind):
        parse_meta_template(minimal_payload(output_type="Matrix"))


def test_missing_field():
    payload = minimal_payload()
    del payload["problem_template"]
    with pytest.raises(MissingField):
        parse_meta_template(payload)


def test_blank_required_field_counts_as_missing():
    with pytest.raises(MissingField):
        parse_meta_template(minimal_payload(core_math_concept="   "))


def test_malformed_document():
    with pytest.raises(MalformedDocument):
        parse_meta_template("{not json")
    with pytest.raises(MalformedDocument):
        parse_meta_template(json.dumps([minimal_payload(), minimal_payload()]))
    with pytest.raises(MalformedDocument):
        parse_meta_template(minimal_payload(param_definition=["not an object"]))


def test_unknown_fields_preserved_in_extras():
    t = parse_meta_template(minimal_payload(reviewer_note="checked by hand"))
    assert t.extras["reviewer_note"] == "checked by hand"
    assert template_to_payload(t)["reviewer_note"] == "checked by hand"


def test_serialize_round_trip_bytes(suite_templates):
    original = fixture_text("fixture_suite.template.json")
    assert dump_templates(suite_templates) == original
    assert load_templates(dump_templates(suite_templates)) == suite_templates


def test_serialize_single_round_trip():
    t = parse_meta_template(minimal_payload())
    assert parse_meta_template(serialize_meta_template(t)) == t


def test_payload_field_order():
    t = parse_meta_template(minimal_payload(exact_expression="{n}^2", zeta="last"))
    keys = list(template_to_payload(t))
    assert keys == [
        "template_id",
        "target_paper_module",
        "core_math_concept",
        "param_definition",
        "problem_template",
        "output_type",
        "param_generation_rule",
        "natural_lang_solution",
        "formal_solution",
        "exact_expression",
        "validation_rule",
        "zeta",
    ]


def test_duplicate_template_ids_rejected():
    doc = json.dumps([minimal_payload(), minimal_payload()])
    with pytest.raises(DuplicateTemplateId):
        load_templates(doc)


def test_extract_placeholders():
    assert extract_placeholders("S_{{n}} and {m} but not {1bad} or {}") == {"n", "m"}
    assert extract_placeholders("no placeholders") == set()


def test_fixture_cayley_template(cayley_template):
    assert cayley_template.template_id == "abstract_algebra_cayley_graph_energy_001"
    assert cayley_template.output_type is OutputKind.INTEGER
    assert cayley_template.exact_expression == "2^({n}-1) * ({n}-1)!"
    assert "print(result)" in cayley_template.formal_solution
    rule_kinds = {r.kind for r in cayley_template.validation_rules}
    assert rule_kinds == {"param_check", "execution_check", "value_check"}
    assert not error_findings(validate_template(cayley_template))


def test_fixture_suite_all_valid(suite_templates):
    assert len(suite_templates) == 5
    for t in suite_templates:
        assert not error_findings(validate_template(t)), t.template_id


def test_validate_undeclared_placeholder():
    t = parse_meta_template(minimal_payload(problem_template="Compute ${q}$ for n = {n}."))
    findings = validate_template(t)
    assert any(f.kind == "undeclared_placeholder" and f.severity == "error" for f in findings)
    assert error_findings(findings)


def test_validate_unused_param_is_warning():
    payload = minimal_payload()
    payload["param_definition"].append(
        {"var_name": "m", "var_type": "Integer", "var_constraint": "m in [1, 2]", "var_source": ""}
    )
    findings = validate_template(parse_meta_template(payload))
    unused = [f for f in findings if f.kind == "unused_param"]
    assert unused and unused[0].severity == "warning"
    assert not error_findings(findings)


def test_validate_missing_rule_kind():
    payload = minimal_payload(validation_rule=[{"type": "param_check", "rule": "n in [2, 3, 5]"}])
    findings = validate_template(parse_meta_template(payload))
    missing = {f.detail for f in findings if f.kind == "missing_rule_kind"}
    assert len(missing) == 2  # execution_check and value_check both absent


def test_validate_duplicate_param():
    payload = minimal_payload()
    payload["param_definition"].append(dict(payload["param_definition"][0]))
    findings = validate_template(parse_meta_template(payload))
    assert any(f.kind == "duplicate_param" and f.severity == "error" for f in findings)


def test_validate_unparseable_constraint():
    payload = minimal_payload()
    payload["param_definition"][0]["var_constraint"] = "n is pleasingly round"
    findings = validate_template(parse_meta_template(payload))
    assert any(f.kind == "unparseable_constraint" and f.severity == "error" for f in findings)


def test_rules_of_kind(cayley_template):
    assert len(cayley_template.rules_of_kind("param_check")) == 1
    assert cayley_template.rules_of_kind("no_such_kind") == ()


def test_with_formal_solution_replaces_only_script(cayley_template):
    swapped = cayley_template.with_formal_solution("n = {n}\nresult = n\nprint(result)")
    assert isinstance(swapped, MetaTemplate)
    assert swapped.formal_solution != cayley_template.formal_solution
    assert swapped.template_id == cayley_template.template_id
    assert swapped.problem_template == cayley_template.problem_template
