"""Problem instances: placeholder substitution and dataset (de)serialization.

An instance record carries exactly six fields (template_id, problem,
solution_steps, numerical_value, exact_expression, params_used), plus
``difficulty`` once stratified. numerical_value is always a decimal
string, never a float. Records have no id field; instance_id is derived
as the first 12 hex chars of sha256 over the canonical JSON of
{"params_used": ..., "template_id": ...}.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import IO, TYPE_CHECKING, Any, Iterable, Mapping

from .canonical import canonical_dumps, content_digest
from .constraints import Number, ParamBinding
from .templates import MetaTemplate, OutputKind

if TYPE_CHECKING:  # pragma: no cover
    from .verification import ExecutionResult


class InstanceError(Exception):
    pass


class UnresolvedPlaceholder(InstanceError):
    def __init__(self, names: Iterable[str]):
        self.names = sorted(set(names))
        super().__init__(f"unresolved placeholders after substitution: {', '.join(self.names)}")


class ValueMismatch(InstanceError):
    pass


class MalformedInstance(InstanceError):
    pass


class SinkUnavailable(InstanceError):
    pass


def render_value(value: Number) -> str:
    """Canonical decimal rendering of a parameter value."""
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return str(value.numerator)
        return str(value)  # "p/q", exact
    return str(value)


def substitute_placeholders(text: str, assignments: Mapping[str, Number]) -> str:
    """Replace every ``{name}`` for bound names, then unescape ``{{``/``}}``.

    Unbound placeholders survive untouched; substitution runs before
    unescaping, so ``S_{{n}}`` with n=181 renders as ``S_{181}``.
    """
    rendered = text
    for name, value in assignments.items():
        token = render_value(value)
        rendered = re.sub(r"\{" + re.escape(name) + r"\}", lambda _m: token, rendered)
    return rendered.replace("{{", "{").replace("}}", "}")


def _leftover_declared(text: str, declared: Iterable[str]) -> set[str]:
    leftovers = set()
    for name in declared:
        if re.search(r"\{" + re.escape(name) + r"\}", text):
            leftovers.add(name)
    return leftovers


@dataclass
class ProblemInstance:
    template_id: str
    problem: str
    solution_steps: str
    numerical_value: str
    exact_expression: str
    params_used: dict[str, Any]
    difficulty: str | None = None
    provenance: dict[str, Any] | None = None
    # in-memory only, never serialized
    output_kind: OutputKind = OutputKind.INTEGER
    index: int = 0

    @property
    def instance_id(self) -> str:
        return content_digest({"params_used": self.params_used, "template_id": self.template_id})[:12]

    def with_difficulty(self, tier: str) -> "ProblemInstance":
        return replace(self, difficulty=tier)


def instance_to_payload(inst: ProblemInstance) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "template_id": inst.template_id,
        "problem": inst.problem,
        "solution_steps": inst.solution_steps,
        "numerical_value": inst.numerical_value,
        "exact_expression": inst.exact_expression,
        "params_used": inst.params_used,
    }
    if inst.difficulty is not None:
        payload["difficulty"] = inst.difficulty
    if inst.provenance is not None:
        payload["provenance"] = inst.provenance
    return payload


_DECIMAL_RE = re.compile(r"-?\d+(\.\d+)?([eE][-+]?\d+)?$")


def _jsonable_params(assignments: Mapping[str, Number]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for name in assignments:
        value = assignments[name]
        if isinstance(value, Fraction) and value.denominator != 1:
            out[name] = str(value)
        else:
            out[name] = int(value)
    return out


def _check_value_consistency(kind: OutputKind, expression: str, decimal_value: str) -> None:
    from .expressions import ExpressionError, evaluate_expression  # local import, avoids cycle

    try:
        exact = evaluate_expression(expression)
    except ExpressionError:
        return  # free-form expressions are graded later, not validated here
    try:
        reported = Fraction(decimal_value)
    except (ValueError, ZeroDivisionError):
        raise MalformedInstance(f"numerical_value {decimal_value!r} is not a decimal string")
    if kind is OutputKind.REAL:
        if reported == exact:
            return
        bound = abs(exact) * Fraction(1, 10**9)
        if abs(reported - exact) > bound:
            raise ValueMismatch(f"numerical_value {decimal_value} is not within 1e-9 of {expression}")
    elif reported != exact:
        raise ValueMismatch(f"numerical_value {decimal_value} != exact value of {expression}")


def instantiate(t: MetaTemplate, b: ParamBinding, value: "ExecutionResult") -> ProblemInstance:
    """Materialize one instance from a verified execution result.

    The exact_expression comes from the template's optional pattern when
    present, else it falls back to the verified decimal value itself (a
    valid, if degenerate, expression).
    """
    if value.status != "success" or value.value is None:
        raise InstanceError(f"cannot instantiate from execution status {value.status!r}")
    if not _DECIMAL_RE.fullmatch(value.value.strip()):
        raise MalformedInstance(f"executor value {value.value!r} is not a decimal string")

    declared = [p.var_name for p in t.param_definitions]
    problem = substitute_placeholders(t.problem_template, b.assignments)
    solution_steps = substitute_placeholders(t.natural_lang_solution, b.assignments)
    if t.exact_expression is not None:
        exact_expression = substitute_placeholders(t.exact_expression, b.assignments)
    else:
        exact_expression = value.value.strip()

    leftovers: set[str] = set()
    for text in (problem, solution_steps, exact_expression):
        leftovers |= _leftover_declared(text, declared)
    if leftovers:
        raise UnresolvedPlaceholder(leftovers)

    _check_value_consistency(t.output_type, exact_expression, value.value.strip())
    return ProblemInstance(
        template_id=t.template_id,
        problem=problem,
        solution_steps=solution_steps,
        numerical_value=value.value.strip(),
        exact_expression=exact_expression,
        params_used=_jsonable_params(b.assignments),
        output_kind=t.output_type,
        index=b.index,
    )


def sort_instances(instances: Iterable[ProblemInstance]) -> list[ProblemInstance]:
    return sorted(instances, key=lambda i: (i.template_id, i.index))


def render_dataset(instances: Iterable[ProblemInstance], destination: str | Path | IO[str]) -> int:
    """Write a dataset as a canonical JSON list; returns the record count."""
    ordered = sort_instances(instances)
    text = canonical_dumps([instance_to_payload(i) for i in ordered])
    try:
        if hasattr(destination, "write"):
            destination.write(text)  # type: ignore[union-attr]
        else:
            Path(destination).write_text(text, encoding="utf-8")  # type: ignore[arg-type]
    except OSError as exc:
        raise SinkUnavailable(str(exc)) from exc
    return len(ordered)


_REQUIRED_INSTANCE_FIELDS = (
    "template_id",
    "problem",
    "solution_steps",
    "numerical_value",
    "exact_expression",
    "params_used",
)


def instance_from_payload(
    record: Mapping[str, Any],
    index: int = 0,
    kinds: Mapping[str, OutputKind] | None = None,
) -> ProblemInstance:
    for key in _REQUIRED_INSTANCE_FIELDS:
        if key not in record:
            raise MalformedInstance(f"instance record missing field {key!r}")
    params = record["params_used"]
    if not isinstance(params, Mapping):
        raise MalformedInstance("params_used must be an object")
    value = record["numerical_value"]
    # a JSON number here would have round-tripped through binary float
    if not isinstance(value, str) or not _DECIMAL_RE.fullmatch(value.strip()):
        raise MalformedInstance(f"numerical_value must be a decimal string, got {value!r}")
    kind = OutputKind.INTEGER
    if kinds and record["template_id"] in kinds:
        kind = kinds[record["template_id"]]
    return ProblemInstance(
        template_id=str(record["template_id"]),
        problem=str(record["problem"]),
        solution_steps=str(record["solution_steps"]),
        numerical_value=value.strip(),
        exact_expression=str(record["exact_expression"]),
        params_used=dict(params),
        difficulty=record.get("difficulty"),
        provenance=record.get("provenance"),
        output_kind=kind,
        index=index,
    )


def load_dataset(
    source: str | Path | IO[str],
    templates: Iterable[MetaTemplate] | None = None,
) -> list[ProblemInstance]:
    """Read a dataset file; templates, when given, restore output kinds."""
    if hasattr(source, "read"):
        text = source.read()  # type: ignore[union-attr]
    else:
        text = Path(source).read_text(encoding="utf-8")  # type: ignore[arg-type]
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInstance(f"invalid JSON at offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(payload, list):
        raise MalformedInstance("dataset must be a JSON list")
    kinds = {t.template_id: t.output_type for t in templates} if templates else None
    return [instance_from_payload(record, index=i, kinds=kinds) for i, record in enumerate(payload)]
