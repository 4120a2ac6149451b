"""Build a verified problem dataset from the packaged fixtures.

Replays the recorded template-generation transcripts and answers
execution jobs from the recorded table, so the run is offline and
byte-deterministic:

    python3 demos/build_dataset.py [--out demo_out] [--seed 7]

Artifacts land in --out: the template file, the verified dataset, and
the rejection log.
"""

from __future__ import annotations

import argparse
import json
from datetime import date
from pathlib import Path

from theorembench.agents import (
    FilterPolicy,
    PipelineConfig,
    ProviderConfig,
    build_provider,
    filter_papers,
    load_manifest,
    run_generation,
)
from theorembench.constraints import SamplerConfig
from theorembench.curation import dedup_filter, load_corpus
from theorembench.fixtures_data import fixture_path
from theorembench.instances import render_dataset
from theorembench.templates import dump_templates
from theorembench.verification import (
    ExecutorConfig,
    MockExecutor,
    render_rejection_log,
    verify_dataset,
)


def build(out: Path, seed: int = 7):
    """Ingest, generate, verify, and dedup; returns (templates, instances, rejections)."""
    out.mkdir(parents=True, exist_ok=True)

    records = load_manifest(fixture_path("papers.manifest.json"))
    accepted, rejected = filter_papers(records, FilterPolicy(reference_date=date(2026, 6, 1)))
    print(f"ingest: accepted {len(accepted)} of {len(records)} papers")
    for record, reasons in rejected:
        print(f"  rejected {record.paper_id}: {', '.join(reasons)}")

    provider = build_provider(
        ProviderConfig(mode="replay", transcript_path=str(fixture_path("transcripts", "generation.jsonl")))
    )
    executor = MockExecutor.from_json(fixture_path("executor_table.json"))
    result = run_generation(accepted, provider, executor, PipelineConfig(seed=seed))
    print(f"generate: {len(result.templates)} templates ({result.api_calls} provider calls)")
    for outcome in result.outcomes:
        print(f"  {outcome.paper_id}: {outcome.status} -> {', '.join(outcome.template_ids) or '-'}")

    sampler = SamplerConfig(seed=seed, instances_per_template=10)
    instances, rejections = verify_dataset(result.templates, sampler, ExecutorConfig(), executor)
    print(f"verify: {len(instances)} instances, {len(rejections)} rejected while sampling")

    corpus = load_corpus(fixture_path("reference_corpus.txt"))
    instances, removed = dedup_filter(instances, corpus, threshold=0.8)
    print(f"dedup: {len(removed)} near-duplicates dropped against {len(corpus)} corpus entries")

    (out / "generated.template.json").write_text(dump_templates(result.templates), encoding="utf-8")
    render_dataset(instances, out / "dataset.problems.json")
    rejection_log = json.dumps(render_rejection_log(rejections), indent=2) + "\n"
    (out / "rejections.json").write_text(rejection_log, encoding="utf-8")
    return result.templates, instances, rejections


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("demo_out"))
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    _, instances, _ = build(args.out, args.seed)

    per_template: dict[str, int] = {}
    for inst in instances:
        per_template[inst.template_id] = per_template.get(inst.template_id, 0) + 1
    print("\ninstances per template:")
    for template_id in sorted(per_template):
        print(f"  {template_id}: {per_template[template_id]}")

    sample = instances[0]
    print(f"\nsample instance {sample.instance_id} ({sample.template_id}):")
    print(f"  problem: {sample.problem[:140]}...")
    print(f"  exact_expression: {sample.exact_expression}")
    print(f"  numerical_value: {sample.numerical_value[:60]}")
    print(f"\nartifacts written to {args.out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
