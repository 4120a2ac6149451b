"""Meta-template records: parsing, validation, canonical serialization.

A meta-template is a JSON record describing one parameterized problem
family: placeholder-bearing problem/solution texts, typed parameter
declarations with textual constraints, and validation rules that every
generated instance must pass. Placeholders are ``{name}`` tokens where
``name`` matches ``[A-Za-z][A-Za-z0-9_]*``; doubled braces ``{{``/``}}``
denote literal braces and are unescaped after substitution.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from .canonical import canonical_dumps

PLACEHOLDER_RE = re.compile(r"\{([A-Za-z][A-Za-z0-9_]*)\}")

RULE_KINDS = ("param_check", "execution_check", "value_check")


class TemplateError(Exception):
    """Base class for template parsing and validation failures."""


class MissingField(TemplateError):
    def __init__(self, field_name: str, context: str = "template"):
        self.field_name = field_name
        super().__init__(f"{context} is missing required field {field_name!r}")


class MalformedDocument(TemplateError):
    pass


class UnknownOutputKind(TemplateError):
    def __init__(self, tag: str):
        self.tag = tag
        super().__init__(f"unknown output kind {tag!r}; expected Integer, Real, or Expression")


class DuplicateTemplateId(TemplateError):
    pass


class OutputKind(str, enum.Enum):
    INTEGER = "Integer"
    REAL = "Real"
    EXPRESSION = "Expression"

    @classmethod
    def from_tag(cls, tag: str) -> "OutputKind":
        for kind in cls:
            if kind.value.lower() == str(tag).strip().lower():
                return kind
        raise UnknownOutputKind(str(tag))


@dataclass(frozen=True)
class ParamDefinition:
    var_name: str
    var_type: str
    var_constraint: str
    var_source: str = ""
    extras: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ValidationRule:
    kind: str  # one of RULE_KINDS
    rule: str  # raw rule text, kept verbatim
    extras: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Finding:
    """One template-quality issue. severity is "error" or "warning"."""

    severity: str
    kind: str
    detail: str


@dataclass(frozen=True)
class MetaTemplate:
    template_id: str
    target_paper_module: str
    core_math_concept: str
    param_definitions: tuple[ParamDefinition, ...]
    problem_template: str
    output_type: OutputKind
    param_generation_rules: tuple[str, ...]
    natural_lang_solution: str
    formal_solution: str
    validation_rules: tuple[ValidationRule, ...]
    exact_expression: str | None = None
    extras: Mapping[str, Any] = field(default_factory=dict)

    def with_formal_solution(self, script: str) -> "MetaTemplate":
        return replace(self, formal_solution=script)

    def rules_of_kind(self, kind: str) -> tuple[ValidationRule, ...]:
        return tuple(r for r in self.validation_rules if r.kind == kind)


_REQUIRED_FIELDS = (
    "template_id",
    "target_paper_module",
    "core_math_concept",
    "param_definition",
    "problem_template",
    "output_type",
    "param_generation_rule",
    "natural_lang_solution",
    "formal_solution",
    "validation_rule",
)

_KNOWN_FIELDS = set(_REQUIRED_FIELDS) | {"exact_expression"}

# scalar text fields that must be present and non-blank
_STRING_FIELDS = (
    "template_id",
    "target_paper_module",
    "core_math_concept",
    "problem_template",
    "natural_lang_solution",
    "formal_solution",
)


def extract_placeholders(text: str) -> set[str]:
    """Names of all ``{name}`` tokens in ``text``.

    A name inside doubled braces, as in ``S_{{n}}``, is still extracted:
    the inner ``{n}`` is a live placeholder and the outer pair renders as
    literal braces after substitution.
    """
    return set(PLACEHOLDER_RE.findall(text))


def _require(payload: Mapping[str, Any], key: str, context: str) -> Any:
    if key not in payload:
        raise MissingField(key, context)
    value = payload[key]
    if value is None or (isinstance(value, str) and not value.strip()):
        raise MissingField(key, context)
    return value


def _parse_param_definition(entry: Any, index: int) -> ParamDefinition:
    context = f"param_definition[{index}]"
    if not isinstance(entry, Mapping):
        raise MalformedDocument(f"{context} must be an object, got {type(entry).__name__}")
    extras = {k: v for k, v in entry.items() if k not in ("var_name", "var_type", "var_constraint", "var_source")}
    return ParamDefinition(
        var_name=str(_require(entry, "var_name", context)),
        var_type=str(_require(entry, "var_type", context)),
        var_constraint=str(_require(entry, "var_constraint", context)),
        var_source=str(entry.get("var_source", "")),
        extras=extras,
    )


def _parse_validation_rule(entry: Any, index: int) -> ValidationRule:
    context = f"validation_rule[{index}]"
    if not isinstance(entry, Mapping):
        raise MalformedDocument(f"{context} must be an object, got {type(entry).__name__}")
    kind = str(_require(entry, "type", context))
    if kind not in RULE_KINDS:
        raise MalformedDocument(f"{context} has unknown type {kind!r}; expected one of {', '.join(RULE_KINDS)}")
    rule = str(_require(entry, "rule", context))
    extras = {k: v for k, v in entry.items() if k not in ("type", "rule")}
    return ValidationRule(kind=kind, rule=rule, extras=extras)


def _string_list(value: Any, field_name: str) -> tuple[str, ...]:
    if isinstance(value, str):
        return (value,)
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return tuple(value)
    raise MalformedDocument(f"{field_name} must be a string or a list of strings")


def template_from_payload(payload: Mapping[str, Any]) -> MetaTemplate:
    for key in _REQUIRED_FIELDS:
        if key not in payload:
            raise MissingField(key)
    for key in _STRING_FIELDS:
        _require(payload, key, "template record")
    template_id = payload["template_id"]
    if not isinstance(template_id, str):
        raise MalformedDocument("template_id must be a string")

    raw_params = payload["param_definition"]
    if not isinstance(raw_params, list):
        raise MalformedDocument("param_definition must be a list")
    params = tuple(_parse_param_definition(p, i) for i, p in enumerate(raw_params))

    raw_rules = payload["validation_rule"]
    if not isinstance(raw_rules, list):
        raise MalformedDocument("validation_rule must be a list")
    rules = tuple(_parse_validation_rule(r, i) for i, r in enumerate(raw_rules))

    exact_expression = payload.get("exact_expression")
    if exact_expression is not None and not isinstance(exact_expression, str):
        raise MalformedDocument("exact_expression must be a string when present")

    extras = {k: payload[k] for k in payload if k not in _KNOWN_FIELDS}
    return MetaTemplate(
        template_id=template_id,
        target_paper_module=str(payload["target_paper_module"]),
        core_math_concept=str(payload["core_math_concept"]),
        param_definitions=params,
        problem_template=str(payload["problem_template"]),
        output_type=OutputKind.from_tag(payload["output_type"]),
        param_generation_rules=_string_list(payload["param_generation_rule"], "param_generation_rule"),
        natural_lang_solution=str(payload["natural_lang_solution"]),
        formal_solution=str(payload["formal_solution"]),
        validation_rules=rules,
        exact_expression=exact_expression,
        extras=extras,
    )


def parse_meta_template(document: str | Mapping[str, Any]) -> MetaTemplate:
    """Parse one meta-template record from JSON text or a decoded mapping.

    A singleton JSON list is unwrapped; a longer list is rejected (use
    load_templates for corpora). Unknown fields are preserved verbatim in
    ``extras`` so serialization round-trips byte-identically.
    """
    if isinstance(document, str):
        try:
            payload = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"invalid JSON at offset {exc.pos}: {exc.msg}") from exc
    else:
        payload = document
    if isinstance(payload, list):
        if len(payload) != 1:
            raise MalformedDocument(f"expected a single template record, got a list of {len(payload)}")
        payload = payload[0]
    if not isinstance(payload, Mapping):
        raise MalformedDocument(f"template record must be an object, got {type(payload).__name__}")
    return template_from_payload(payload)


def template_to_payload(t: MetaTemplate) -> dict[str, Any]:
    """Schema-ordered plain dict for serialization and hashing."""
    payload: dict[str, Any] = {
        "template_id": t.template_id,
        "target_paper_module": t.target_paper_module,
        "core_math_concept": t.core_math_concept,
        "param_definition": [
            {
                "var_name": p.var_name,
                "var_type": p.var_type,
                "var_constraint": p.var_constraint,
                "var_source": p.var_source,
                **{k: p.extras[k] for k in sorted(p.extras)},
            }
            for p in t.param_definitions
        ],
        "problem_template": t.problem_template,
        "output_type": t.output_type.value,
        "param_generation_rule": list(t.param_generation_rules),
        "natural_lang_solution": t.natural_lang_solution,
        "formal_solution": t.formal_solution,
    }
    if t.exact_expression is not None:
        payload["exact_expression"] = t.exact_expression
    payload["validation_rule"] = [
        {"type": r.kind, "rule": r.rule, **{k: r.extras[k] for k in sorted(r.extras)}}
        for r in t.validation_rules
    ]
    for key in sorted(t.extras):
        payload[key] = t.extras[key]
    return payload


def serialize_meta_template(t: MetaTemplate) -> str:
    return canonical_dumps(template_to_payload(t))


def load_templates(text: str) -> list[MetaTemplate]:
    """Parse a template corpus: one record or a JSON list of records."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON at offset {exc.pos}: {exc.msg}") from exc
    records = payload if isinstance(payload, list) else [payload]
    templates = []
    seen: set[str] = set()
    for record in records:
        if not isinstance(record, Mapping):
            raise MalformedDocument("template corpus entries must be objects")
        t = template_from_payload(record)
        if t.template_id in seen:
            raise DuplicateTemplateId(f"duplicate template_id {t.template_id!r} in corpus")
        seen.add(t.template_id)
        templates.append(t)
    return templates


def load_template_file(path: str | Path) -> list[MetaTemplate]:
    return load_templates(Path(path).read_text(encoding="utf-8"))


def dump_templates(templates: Iterable[MetaTemplate]) -> str:
    return canonical_dumps([template_to_payload(t) for t in templates])


def validate_template(t: MetaTemplate) -> list[Finding]:
    """Structural lint over one template; empty result means valid.

    Error-grade findings: undeclared placeholders, duplicate parameter
    declarations, missing rule kinds, unparseable constraint texts.
    Warning-grade: a declared parameter used in no text.
    """
    from .constraints import ConstraintError, parse_constraint  # local import, avoids cycle

    findings: list[Finding] = []
    declared = [p.var_name for p in t.param_definitions]
    for name in sorted({n for n in declared if declared.count(n) > 1}):
        findings.append(Finding("error", "duplicate_param", f"parameter {name!r} declared more than once"))

    texts = [t.problem_template, t.natural_lang_solution, t.formal_solution]
    if t.exact_expression is not None:
        texts.append(t.exact_expression)
    used: set[str] = set()
    for text in texts:
        used |= extract_placeholders(text)

    for name in sorted(used - set(declared)):
        findings.append(Finding("error", "undeclared_placeholder", f"placeholder {{{name}}} has no declaration"))
    for name in sorted(set(declared) - used):
        findings.append(Finding("warning", "unused_param", f"parameter {name!r} appears in no template text"))

    for kind in RULE_KINDS:
        if not t.rules_of_kind(kind):
            findings.append(Finding("error", "missing_rule_kind", f"no validation rule of type {kind!r}"))

    for p in t.param_definitions:
        try:
            parse_constraint(p.var_constraint)
        except ConstraintError as exc:
            findings.append(
                Finding("error", "unparseable_constraint", f"var_constraint for {p.var_name!r}: {exc}")
            )
    for r in t.rules_of_kind("param_check"):
        try:
            parse_constraint(r.rule)
        except ConstraintError as exc:
            findings.append(Finding("error", "unparseable_constraint", f"param_check rule {r.rule!r}: {exc}"))
    return findings


def error_findings(findings: Iterable[Finding]) -> list[Finding]:
    return [f for f in findings if f.severity == "error"]
