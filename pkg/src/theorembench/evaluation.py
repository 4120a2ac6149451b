"""Final-answer extraction, exact grading, and benchmark metrics.

Grading never floats: integer and expression kinds compare exact
rationals, the real kind compares against a relative tolerance using
Fraction arithmetic throughout. An unparseable predicted answer grades
incorrect with a diagnostic, never an exception.

Metrics over a graded dataset:

* d1 difficulty: 1 - mean model accuracy
* d2 frontier gap: 1 - best model accuracy
* d3 model spread: population stddev / mean accuracy (None when mean is 0)
* d4 academic level: mean of per-instance level scores
* d5 breadth: covered top-level subject classes / 63
* d6 originality: original instances / total
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .expressions import ExpressionError, evaluate_expression
from .instances import ProblemInstance
from .templates import OutputKind


class EvaluationError(Exception):
    pass


class MissingTier(EvaluationError):
    pass


class InvalidCounts(EvaluationError):
    pass


class UnknownLevel(EvaluationError):
    pass


# --- final answer extraction ----------------------------------------------------

_BOXED_MARK = "\\boxed{"
_MATH_RUN_RE = re.compile(r"(?:[0-9+\-*/^!(){}.,×·=]|\\[A-Za-z]+|[ \t])+")


def _last_boxed(response: str) -> str | None:
    start = response.rfind(_BOXED_MARK)
    if start < 0:
        return None
    depth = 0
    for pos in range(start + len(_BOXED_MARK) - 1, len(response)):
        ch = response[pos]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return response[start + len(_BOXED_MARK) : pos]
    return None  # unbalanced braces: no usable content


def extract_final_answer(response: str) -> str | None:
    """Final answer of a free-form response, or None.

    Order of preference: content of the last balanced ``\\boxed{...}``,
    else the last run of math-expression characters that contains a
    digit (the tail after ``=`` when one is present).
    """
    if not response:
        return None
    boxed = _last_boxed(response)
    if boxed is not None:
        return boxed.strip().strip("$").strip() or None

    candidate: str | None = None
    for run in _MATH_RUN_RE.findall(response):
        if any(ch.isdigit() for ch in run):
            candidate = run
    if candidate is None:
        return None
    if "=" in candidate:
        candidate = candidate.rsplit("=", 1)[1]
    candidate = candidate.strip().rstrip(".,;").strip()
    return candidate or None


# --- grading ---------------------------------------------------------------------


@dataclass
class GradingPolicy:
    real_rel_tolerance: float | Fraction | str = Fraction(1, 10**9)
    expression_grammar_enabled: bool = True

    def tolerance(self) -> Fraction:
        tol = self.real_rel_tolerance
        if isinstance(tol, Fraction):
            return tol
        if isinstance(tol, float):
            return Fraction(Decimal(repr(tol)))  # exact decimal reading of the float's repr
        return Fraction(Decimal(str(tol)))


def _parse_exact(text: str, allow_grammar: bool) -> Fraction:
    """Predicted answer text -> exact rational; raises ValueError on failure."""
    text = text.strip().strip("$").strip()
    if not text:
        raise ValueError("empty answer")
    try:
        return Fraction(text)  # plain integers, decimals, p/q
    except (ValueError, ZeroDivisionError):
        pass
    if allow_grammar:
        try:
            return Fraction(evaluate_expression(text))
        except ExpressionError as exc:
            raise ValueError(str(exc)) from exc
    raise ValueError(f"not a plain number: {text!r}")


def _expected_exact(expected: ProblemInstance) -> Fraction:
    if expected.output_kind is OutputKind.EXPRESSION:
        try:
            return Fraction(evaluate_expression(expected.exact_expression))
        except ExpressionError:
            pass  # canonical expression outside the grammar: decimal fallback
    return Fraction(expected.numerical_value)


def grade_answer_detail(
    expected: ProblemInstance,
    predicted: str | None,
    policy: GradingPolicy | None = None,
) -> tuple[bool, str | None]:
    """(correct flag, diagnostic). Diagnostics only accompany False."""
    policy = policy or GradingPolicy()
    if predicted is None or not predicted.strip():
        return False, "no answer extracted"
    try:
        target = _expected_exact(expected)
    except (ValueError, ZeroDivisionError) as exc:
        return False, f"reference value unreadable: {exc}"
    try:
        value = _parse_exact(predicted, policy.expression_grammar_enabled)
    except ValueError as exc:
        return False, f"unparseable answer: {exc}"

    if expected.output_kind is OutputKind.REAL:
        tol = policy.tolerance()
        if target == 0:
            return (abs(value) <= tol, None if abs(value) <= tol else "outside tolerance")
        ok = abs(value - target) <= tol * abs(target)
        return ok, None if ok else "outside tolerance"
    ok = value == target
    return ok, None if ok else "wrong value"


def grade_answer(
    expected: ProblemInstance,
    predicted: str | None,
    policy: GradingPolicy | None = None,
) -> bool:
    return grade_answer_detail(expected, predicted, policy)[0]


@dataclass(frozen=True)
class EvalRecord:
    model_id: str
    instance_id: str
    response: str
    extracted_answer: str | None
    correct: bool
    diagnostic: str | None = None


def evaluate_response(
    model_id: str,
    instance: ProblemInstance,
    response: str,
    policy: GradingPolicy | None = None,
) -> EvalRecord:
    extracted = extract_final_answer(response)
    correct, diagnostic = grade_answer_detail(instance, extracted, policy)
    return EvalRecord(
        model_id=model_id,
        instance_id=instance.instance_id,
        response=response,
        extracted_answer=extracted,
        correct=correct,
        diagnostic=diagnostic,
    )


EVAL_HEADER = ("model_id", "instance_id", "response", "extracted_answer", "correct", "diagnostic")


def dump_eval_records(records: Iterable[EvalRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EVAL_HEADER)
    for r in records:
        writer.writerow(
            [r.model_id, r.instance_id, r.response, r.extracted_answer or "", int(r.correct), r.diagnostic or ""]
        )
    return out.getvalue()


def load_eval_records(source: str | Path | io.TextIOBase) -> list[EvalRecord]:
    if hasattr(source, "read"):
        text = source.read()  # type: ignore[union-attr]
    else:
        text = Path(source).read_text(encoding="utf-8")  # type: ignore[arg-type]
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != EVAL_HEADER:
        raise EvaluationError(f"eval-record file must start with header {','.join(EVAL_HEADER)}")
    records = []
    for row in rows[1:]:
        if not row:
            continue
        model_id, instance_id, response, extracted, correct, diagnostic = row
        records.append(
            EvalRecord(model_id, instance_id, response, extracted or None, correct == "1", diagnostic or None)
        )
    return records


# --- accuracy tables ---------------------------------------------------------------


@dataclass(frozen=True)
class AccuracyCell:
    correct: int
    total: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.correct, self.total)


def accuracy_by_tier(
    records: Sequence[EvalRecord],
    tiers: Mapping[str, str],
) -> dict[str, dict[str, AccuracyCell | None]]:
    """Per-model, per-tier accuracy plus an "overall" column.

    ``tiers`` maps instance_id -> tier tag; a record whose instance is
    missing from the map raises MissingTier. Cells with no attempts are
    explicit None, never 0.
    """
    tier_tags = sorted(set(tiers.values()))
    table: dict[str, dict[str, AccuracyCell | None]] = {}
    tallies: dict[str, dict[str, list[int]]] = {}
    for r in records:
        if r.instance_id not in tiers:
            raise MissingTier(f"record for instance {r.instance_id} has no tier assignment")
        tier = tiers[r.instance_id]
        per_model = tallies.setdefault(r.model_id, {})
        for key in (tier, "overall"):
            cell = per_model.setdefault(key, [0, 0])
            cell[0] += int(r.correct)
            cell[1] += 1
    for model_id in sorted(tallies):
        row: dict[str, AccuracyCell | None] = {}
        for tag in [*tier_tags, "overall"]:
            raw = tallies[model_id].get(tag)
            row[tag] = AccuracyCell(raw[0], raw[1]) if raw else None
        table[model_id] = row
    return table


@dataclass(frozen=True)
class AccuracyStats:
    mu: Fraction  # mean per-model accuracy
    a_max: Fraction  # best per-model accuracy
    sigma: float  # population stddev of per-model accuracies

    @classmethod
    def from_accuracies(cls, accuracies: Sequence[Fraction | float]) -> "AccuracyStats":
        if not accuracies:
            raise InvalidCounts("no model accuracies")
        exact = [Fraction(a) if not isinstance(a, Fraction) else a for a in accuracies]
        mu = sum(exact, Fraction(0)) / len(exact)
        variance = sum((a - mu) ** 2 for a in exact) / len(exact)
        return cls(mu=mu, a_max=max(exact), sigma=math.sqrt(float(variance)))


def model_accuracies(records: Sequence[EvalRecord]) -> dict[str, Fraction]:
    counts: dict[str, list[int]] = {}
    for r in records:
        cell = counts.setdefault(r.model_id, [0, 0])
        cell[0] += int(r.correct)
        cell[1] += 1
    return {m: Fraction(c, t) for m, (c, t) in sorted(counts.items())}


# --- benchmark metrics ---------------------------------------------------------------

TOP_LEVEL_CLASS_COUNT = 63

ACADEMIC_SCORES: dict[str, Fraction] = {
    "research": Fraction(1),
    "graduate": Fraction(4, 5),
    "undergraduate": Fraction(7, 10),
    "high_school_olympiad": Fraction(3, 5),
    "middle_high_school": Fraction(2, 5),
    "primary_school": Fraction(1, 5),
}


def score_for_level(level: str) -> Fraction:
    key = re.sub(r"[\s\-]+", "_", level.strip().lower())
    if key not in ACADEMIC_SCORES:
        raise UnknownLevel(f"unknown academic level {level!r}")
    return ACADEMIC_SCORES[key]


@dataclass(frozen=True)
class DatasetMeta:
    level_counts: Mapping[str, int]  # academic level -> instance count
    coverage_covered: int
    coverage_total: int = TOP_LEVEL_CLASS_COUNT
    original_count: int = 0
    total_count: int = 0


@dataclass(frozen=True)
class BenchmarkMetrics:
    d1: Fraction
    d2: Fraction
    d3: float | None
    d4: Fraction
    d5: Fraction
    d6: Fraction


def compute_metrics(stats: AccuracyStats, meta: DatasetMeta) -> BenchmarkMetrics:
    if not (0 <= stats.mu <= 1) or not (0 <= stats.a_max <= 1):
        raise InvalidCounts("accuracies must lie in [0, 1]")
    if meta.coverage_total <= 0 or meta.coverage_covered < 0 or meta.coverage_covered > meta.coverage_total:
        raise InvalidCounts("coverage counts out of range")
    if meta.total_count <= 0 or meta.original_count < 0 or meta.original_count > meta.total_count:
        raise InvalidCounts("originality counts out of range")
    total_levels = sum(meta.level_counts.values())
    if total_levels <= 0:
        raise InvalidCounts("no academic level counts")
    weighted = sum(
        (score_for_level(level) * count for level, count in meta.level_counts.items()),
        Fraction(0),
    )
    d3 = None if stats.mu == 0 else stats.sigma / float(stats.mu)
    return BenchmarkMetrics(
        d1=1 - stats.mu,
        d2=1 - stats.a_max,
        d3=d3,
        d4=weighted / total_levels,
        d5=Fraction(meta.coverage_covered, meta.coverage_total),
        d6=Fraction(meta.original_count, meta.total_count),
    )


def _round2(value: Fraction | float) -> str:
    if isinstance(value, Fraction):
        exact = Decimal(value.numerator) / Decimal(value.denominator)
    else:
        exact = Decimal(repr(value))
    return str(exact.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def render_metrics_report(metrics: BenchmarkMetrics) -> dict:
    """JSON-ready report: exact fractions, float values, 2-decimal table form."""
    def fraction_entry(value: Fraction) -> dict:
        return {"exact": f"{value.numerator}/{value.denominator}", "value": float(value), "rounded": _round2(value)}

    report = {
        "d1_difficulty": fraction_entry(metrics.d1),
        "d2_frontier_gap": fraction_entry(metrics.d2),
        "d3_model_spread": (
            None if metrics.d3 is None else {"value": metrics.d3, "rounded": _round2(metrics.d3)}
        ),
        "d4_academic_level": fraction_entry(metrics.d4),
        "d5_breadth": fraction_entry(metrics.d5),
        "d6_originality": fraction_entry(metrics.d6),
    }
    return report
