"""Difficulty stratification, contamination filtering, corpus statistics.

Tiering runs a fixed panel of models over each instance. A model counts
as correct when any of its trials is correct; an instance is Excluded
only when every model is correct on every trial (and the exclusion flag
is set). Thresholds are counts of correct models: Hard 0..hard_max,
Medium hard_max+1..medium_max, Easy above.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .instances import ProblemInstance

TIER_HARD = "Hard"
TIER_MEDIUM = "Medium"
TIER_EASY = "Easy"
EXCLUDED = "Excluded"
TIERS = (TIER_HARD, TIER_MEDIUM, TIER_EASY)


class CurationError(Exception):
    pass


class PanelMismatch(CurationError):
    pass


class UntieredInstance(CurationError):
    pass


@dataclass(frozen=True)
class ModelVerdict:
    model_id: str
    instance_id: str
    trial: int
    correct: bool


@dataclass(frozen=True)
class TierThresholds:
    panel_size: int = 5
    hard_max: int = 1  # Hard: 0..hard_max correct models
    medium_max: int = 3  # Medium: hard_max+1..medium_max
    exclude_if_all_correct_all_trials: bool = True

    def __post_init__(self) -> None:
        if not (0 <= self.hard_max < self.medium_max < self.panel_size):
            raise CurationError(
                f"thresholds must satisfy 0 <= hard_max < medium_max < panel_size, "
                f"got {self.hard_max}, {self.medium_max}, {self.panel_size}"
            )


def stratify(instance_id: str, verdicts: Sequence[ModelVerdict], th: TierThresholds) -> str:
    """Tier tag for one instance: Hard, Medium, Easy, or Excluded."""
    rows = [v for v in verdicts if v.instance_id == instance_id]
    by_model: dict[str, list[bool]] = {}
    for v in rows:
        by_model.setdefault(v.model_id, []).append(v.correct)
    if len(by_model) != th.panel_size:
        raise PanelMismatch(
            f"instance {instance_id}: verdicts cover {len(by_model)} models, panel is {th.panel_size}"
        )
    correct_models = sum(1 for trials in by_model.values() if any(trials))
    if th.exclude_if_all_correct_all_trials and all(all(trials) for trials in by_model.values()):
        return EXCLUDED
    if correct_models <= th.hard_max:
        return TIER_HARD
    if correct_models <= th.medium_max:
        return TIER_MEDIUM
    return TIER_EASY


VERDICT_HEADER = ("model_id", "instance_id", "trial", "correct")


def load_verdicts(source: str | Path | io.TextIOBase) -> list[ModelVerdict]:
    """Read a verdict CSV with header model_id,instance_id,trial,correct."""
    if hasattr(source, "read"):
        text = source.read()  # type: ignore[union-attr]
    else:
        text = Path(source).read_text(encoding="utf-8")  # type: ignore[arg-type]
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or tuple(rows[0]) != VERDICT_HEADER:
        raise CurationError(f"verdict file must start with header {','.join(VERDICT_HEADER)}")
    verdicts = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise CurationError(f"verdict row {lineno} has {len(row)} fields, expected 4")
        model_id, instance_id, trial, correct = row
        if correct not in ("0", "1", "true", "false", "True", "False"):
            raise CurationError(f"verdict row {lineno}: correct must be 0/1/true/false, got {correct!r}")
        verdicts.append(
            ModelVerdict(model_id, instance_id, int(trial), correct in ("1", "true", "True"))
        )
    return verdicts


def dump_verdicts(verdicts: Iterable[ModelVerdict]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(VERDICT_HEADER)
    for v in verdicts:
        writer.writerow([v.model_id, v.instance_id, v.trial, int(v.correct)])
    return out.getvalue()


def stratify_dataset(
    instances: Sequence[ProblemInstance],
    verdicts: Sequence[ModelVerdict],
    th: TierThresholds,
) -> tuple[list[ProblemInstance], list[str]]:
    """Tier every instance; returns (tiered kept instances, excluded ids)."""
    kept: list[ProblemInstance] = []
    excluded: list[str] = []
    for inst in instances:
        tier = stratify(inst.instance_id, verdicts, th)
        if tier == EXCLUDED:
            excluded.append(inst.instance_id)
        else:
            kept.append(inst.with_difficulty(tier))
    return kept, excluded


# --- contamination / near-duplicate filtering ---------------------------------

_MATH_MARKUP = re.compile(r"[\\${}^_]")
_NON_WORD = re.compile(r"[^a-z0-9]+")


def _tokens(text: str) -> list[str]:
    text = _MATH_MARKUP.sub(" ", text.lower())
    return [tok for tok in _NON_WORD.split(text) if tok]


def _shingles(tokens: Sequence[str], n: int = 5) -> frozenset[tuple[str, ...]]:
    if not tokens:
        return frozenset()
    if len(tokens) < n:
        return frozenset({tuple(tokens)})  # short text: one whole-text shingle
    return frozenset(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def similarity(a: str, b: str, n: int = 5) -> float:
    """Jaccard similarity over n-gram shingles of normalized tokens."""
    sa, sb = _shingles(_tokens(a), n), _shingles(_tokens(b), n)
    if not sa and not sb:
        return 1.0
    if not sa or not sb:
        return 0.0
    inter = len(sa & sb)
    union = len(sa | sb)
    return inter / union


@dataclass(frozen=True)
class DedupMatch:
    instance_id: str
    similarity: float
    corpus_index: int


def dedup_filter(
    instances: Sequence[ProblemInstance],
    corpus: Sequence[str],
    threshold: float = 0.8,
) -> tuple[list[ProblemInstance], list[DedupMatch]]:
    """Drop instances too similar to any reference-corpus problem.

    Instances are compared against the corpus only, never against each
    other: parameter variants of one template must all survive.
    """
    corpus_shingles = [_shingles(_tokens(doc)) for doc in corpus]
    kept: list[ProblemInstance] = []
    removed: list[DedupMatch] = []
    for inst in instances:
        inst_shingles = _shingles(_tokens(inst.problem))
        hit: DedupMatch | None = None
        for idx, ref in enumerate(corpus_shingles):
            if not inst_shingles and not ref:
                score = 1.0
            elif not inst_shingles or not ref:
                score = 0.0
            else:
                score = len(inst_shingles & ref) / len(inst_shingles | ref)
            if score >= threshold and (hit is None or score > hit.similarity):
                hit = DedupMatch(inst.instance_id, score, idx)
        if hit is None:
            kept.append(inst)
        else:
            removed.append(hit)
    return kept, removed


def load_corpus(source: str | Path) -> list[str]:
    """Reference corpus: plain text, one problem per line, blanks skipped."""
    lines = Path(source).read_text(encoding="utf-8").splitlines()
    return [line for line in lines if line.strip()]


# --- statistics ----------------------------------------------------------------


@dataclass(frozen=True)
class CurationStats:
    total: int
    counts: Mapping[str, int]  # tier -> count
    fractions: Mapping[str, Fraction]  # tier -> exact fraction of total
    percentages: Mapping[str, str]  # tier -> "51.66" style rendering


def _percent(count: int, total: int) -> str:
    exact = Decimal(count * 100) / Decimal(total)
    return str(exact.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def curation_stats(instances: Sequence[ProblemInstance]) -> CurationStats:
    """Per-tier counts with exact fractions, percentages to 2 decimals."""
    counts = {tier: 0 for tier in TIERS}
    for inst in instances:
        if inst.difficulty is None:
            raise UntieredInstance(f"instance {inst.instance_id} has no difficulty tier")
        if inst.difficulty not in counts:
            raise CurationError(f"instance {inst.instance_id} has unknown tier {inst.difficulty!r}")
        counts[inst.difficulty] += 1
    total = sum(counts.values())
    if total == 0:
        zero = Fraction(0)
        return CurationStats(0, counts, {t: zero for t in TIERS}, {t: "0.00" for t in TIERS})
    fractions = {t: Fraction(counts[t], total) for t in TIERS}
    percentages = {t: _percent(counts[t], total) for t in TIERS}
    return CurationStats(total, counts, fractions, percentages)
