"""Stratify, grade, and report benchmark metrics for a fresh dataset.

Builds the dataset exactly as build_dataset.py does, then synthesizes a
five-model verdict panel and two sets of final answers to walk the
whole evaluation path: difficulty tiers, exact grading, per-tier
accuracy, and the d1-d6 metric report:

    python3 demos/grade_and_report.py [--out demo_out] [--seed 7]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from build_dataset import build

from theorembench.curation import ModelVerdict, TierThresholds, curation_stats, stratify_dataset
from theorembench.evaluation import (
    AccuracyStats,
    DatasetMeta,
    accuracy_by_tier,
    compute_metrics,
    evaluate_response,
    model_accuracies,
    render_metrics_report,
)

PANEL = tuple(f"panel-{c}" for c in "abcde")


def synth_verdicts(instances) -> list[ModelVerdict]:
    """Fixed panel outcomes: cycle instances through 0, 2, 4, and 5 solvers."""
    verdicts = []
    for idx, inst in enumerate(instances):
        solvers = (0, 2, 4, 5)[idx % 4]
        for m, model in enumerate(PANEL):
            for trial in (1, 2):
                correct = m < solvers and (idx % 4 == 3 or trial == 1)
                verdicts.append(ModelVerdict(model, inst.instance_id, trial, correct))
    return verdicts


def synth_responses(instances) -> list[tuple[str, str, str]]:
    """alpha nails every item; beta only answers Easy items correctly."""
    rows = []
    for inst in instances:
        rows.append(("alpha", inst.instance_id, f"The answer is $\\boxed{{{inst.numerical_value}}}$."))
        if inst.difficulty == "Easy":
            rows.append(("beta", inst.instance_id, f"I get \\boxed{{{inst.numerical_value}}}."))
        else:
            rows.append(("beta", inst.instance_id, "I cannot solve this one."))
    return rows


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("demo_out"))
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    templates, instances, _ = build(args.out, args.seed)

    kept, excluded = stratify_dataset(instances, synth_verdicts(instances), TierThresholds())
    stats = curation_stats(kept)
    print(f"\nstratify: {len(kept)} tiered, {len(excluded)} excluded as too easy")
    for tier in ("Hard", "Medium", "Easy"):
        print(f"  {tier}: {stats.counts[tier]} ({stats.percentages[tier]}%)")

    by_id = {inst.instance_id: inst for inst in kept}
    records = [
        evaluate_response(model_id, by_id[instance_id], response)
        for model_id, instance_id, response in synth_responses(kept)
    ]
    tiers = {inst.instance_id: inst.difficulty for inst in kept}
    table = accuracy_by_tier(records, tiers)
    print("\naccuracy by tier:")
    for model, row in table.items():
        cells = []
        for column in ("Hard", "Medium", "Easy", "overall"):
            cell = row.get(column)
            cells.append(f"{column}={cell.correct}/{cell.total}" if cell else f"{column}=-")
        print(f"  {model}: {', '.join(cells)}")

    level_counts: dict[str, int] = {}
    for inst in kept:
        level = "research" if inst.template_id.startswith("abstract_algebra") else "undergraduate"
        level_counts[level] = level_counts.get(level, 0) + 1
    covered = {code for t in templates for code in t.extras.get("msc_codes", [])}
    meta = DatasetMeta(
        level_counts=level_counts,
        coverage_covered=len(covered),
        original_count=len(kept),
        total_count=len(kept),
    )
    accuracies = model_accuracies(records)
    metrics = compute_metrics(AccuracyStats.from_accuracies(list(accuracies.values())), meta)
    print("\nmetric report:")
    for name, entry in render_metrics_report(metrics).items():
        if entry is None:
            print(f"  {name}: undefined (zero mean accuracy)")
            continue
        detail = entry.get("exact", entry["value"])
        print(f"  {name}: {entry['rounded']} ({detail})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
