"""Command-line pipeline: ingest, generate, verify, stratify, evaluate, metrics, audit.

Every command reads one JSON config (--config) plus an optional --seed
override, writes artifacts atomically (temp file + rename, so a failed
run never clobbers a prior artifact), and drops a ``<artifact>.meta.json``
sidecar recording the seed, command, and config digest. Artifacts contain
no timestamps: a rerun with identical inputs is byte-identical.

On failure the process exits 1 with one machine-readable JSON error
record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Mapping, Sequence

from .agents import (
    AgentError,
    FilterPolicy,
    LogprobScreen,
    PipelineConfig,
    ProviderConfig,
    build_provider,
    filter_papers,
    load_manifest,
    run_generation,
)
from .canonical import canonical_dumps, content_digest
from .constraints import ConstraintError, KeyedStream, SamplerConfig
from .curation import (
    CurationError,
    TierThresholds,
    curation_stats,
    dedup_filter,
    load_corpus,
    load_verdicts,
    stratify_dataset,
)
from .evaluation import (
    DatasetMeta,
    EvaluationError,
    GradingPolicy,
    AccuracyStats,
    compute_metrics,
    dump_eval_records,
    evaluate_response,
    load_eval_records,
    model_accuracies,
    render_metrics_report,
)
from .instances import InstanceError, ProblemInstance, load_dataset, render_dataset
from .templates import TemplateError, dump_templates, load_template_file
from .verification import (
    ExecutorConfig,
    MockExecutor,
    RejectionRecord,
    SubprocessExecutor,
    VerificationError,
    render_rejection_log,
    verify_dataset,
)

_ERROR_TYPES = (
    AgentError,
    ConstraintError,
    CurationError,
    EvaluationError,
    InstanceError,
    TemplateError,
    VerificationError,
    FileNotFoundError,
    ValueError,
    KeyError,
)


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    seed: int
    paths: dict[str, str]
    raw: dict[str, Any] = field(default_factory=dict)
    base: str = "."

    @property
    def digest(self) -> str:
        return content_digest(self.raw)

    def resolve(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else Path(self.base) / p

    def path(self, key: str) -> Path:
        if key not in self.paths:
            raise ConfigError(f"config paths.{key} is required for this command")
        return Path(self.paths[key])

    def optional_path(self, key: str) -> Path | None:
        return Path(self.paths[key]) if key in self.paths else None

    def section(self, key: str) -> dict[str, Any]:
        value = self.raw.get(key, {})
        if not isinstance(value, dict):
            raise ConfigError(f"config section {key!r} must be an object")
        return value


def load_config(path: str | Path, seed_override: int | None = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg} at offset {exc.pos}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    seed = seed_override if seed_override is not None else raw.get("seed")
    if not isinstance(seed, int):
        raise ConfigError("config requires an integer seed (or pass --seed)")
    paths = raw.get("paths", {})
    if not isinstance(paths, Mapping) or not all(isinstance(v, str) for v in paths.values()):
        raise ConfigError("config paths must map names to strings")
    base = Path(path).resolve().parent
    resolved = {k: str((base / v)) if not Path(v).is_absolute() else v for k, v in paths.items()}
    return RunConfig(seed=seed, paths=resolved, raw=dict(raw), base=str(base))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False
    )
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except BaseException:
        os.unlink(handle.name)
        raise


def _write_artifact(cfg: RunConfig, command: str, path: Path, text: str) -> None:
    _atomic_write(path, text)
    sidecar = {"command": command, "seed": cfg.seed, "config_digest": cfg.digest}
    _atomic_write(path.with_name(path.name + ".meta.json"), canonical_dumps(sidecar))


def _executor_from_config(cfg: RunConfig):
    section = cfg.section("executor")
    mode = section.get("mode", "subprocess")
    exec_cfg = ExecutorConfig(
        timeout_s=float(section.get("timeout_s", 30.0)),
        memory_mb=int(section.get("memory_mb", 512)),
        max_workers=int(section.get("max_workers", 1)),
    )
    if "runner_command" in section:
        exec_cfg.runner_command = tuple(section["runner_command"])
    if mode == "mock":
        if "table" not in section:
            raise ConfigError("executor.mode=mock requires executor.table")
        return MockExecutor.from_json(cfg.resolve(section["table"])), exec_cfg
    if mode == "subprocess":
        return SubprocessExecutor(exec_cfg), exec_cfg
    raise ConfigError(f"unknown executor mode {mode!r}")


def _provider_from_config(cfg: RunConfig):
    section = cfg.section("provider")
    transcript = section.get("transcript_path") or cfg.paths.get("transcripts")
    return build_provider(
        ProviderConfig(
            mode=section.get("mode", "replay"),
            endpoint=section.get("endpoint"),
            credentials_env=section.get("credentials_env", "THEOREMBENCH_API_KEY"),
            transcript_path=transcript,
            max_concurrency=int(section.get("max_concurrency", 4)),
            retry_attempts=int(section.get("retry_attempts", 3)),
            retry_backoff=float(section.get("retry_backoff", 0.5)),
        )
    )


def _filter_policy(cfg: RunConfig) -> FilterPolicy:
    section = cfg.section("filter")
    if "reference_date" not in section:
        raise ConfigError("config filter.reference_date is required")
    return FilterPolicy(
        reference_date=date.fromisoformat(section["reference_date"]),
        max_age_months=int(section.get("max_age_months", 24)),
        min_authority_tier=int(section.get("min_authority_tier", 3)),
        admit_unknown_computability=bool(section.get("admit_unknown_computability", False)),
    )


def _sampler(cfg: RunConfig) -> SamplerConfig:
    section = cfg.section("sampler")
    return SamplerConfig(
        seed=cfg.seed,
        instances_per_template=int(section.get("instances_per_template", 10)),
        max_rejections=int(section.get("max_rejections", 10_000)),
    )


def _grading_policy(cfg: RunConfig) -> GradingPolicy:
    section = cfg.section("grading")
    policy = GradingPolicy()
    if "real_rel_tolerance" in section:
        policy.real_rel_tolerance = section["real_rel_tolerance"]
    if "expression_grammar_enabled" in section:
        policy.expression_grammar_enabled = bool(section["expression_grammar_enabled"])
    return policy


def _load_templates_for(cfg: RunConfig):
    path = cfg.optional_path("templates")
    return load_template_file(path) if path and path.exists() else []


# --- commands ------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> None:
    records = load_manifest(cfg.path("manifest"))
    accepted, rejected = filter_papers(records, _filter_policy(cfg))
    accepted_payload = [
        {
            "paper_id": r.paper_id,
            "title": r.title,
            "venue": r.venue,
            "publication_date": r.publication_date.isoformat(),
            "msc_codes": list(r.msc_codes),
            "computable_flag": r.computable_flag,
            "authority_tier": r.authority_tier,
        }
        for r in accepted
    ]
    log = {
        "accepted": [r.paper_id for r in accepted],
        "rejected": [{"paper_id": r.paper_id, "reasons": list(reasons)} for r, reasons in rejected],
    }
    _write_artifact(cfg, "ingest", cfg.path("accepted_manifest"), canonical_dumps(accepted_payload))
    _write_artifact(cfg, "ingest", cfg.path("ingest_log"), canonical_dumps(log))
    print(f"ingest: accepted {len(accepted)} of {len(records)} papers")


def cmd_generate(cfg: RunConfig) -> None:
    records = load_manifest(cfg.path("accepted_manifest"))
    provider = _provider_from_config(cfg)
    executor, exec_cfg = _executor_from_config(cfg)
    section = cfg.section("generation")
    pipeline_cfg = PipelineConfig(
        seed=cfg.seed,
        screen=LogprobScreen(float(section.get("logprob_threshold", -0.5))),
        max_drafts=int(section.get("max_drafts", 5)),
        max_templates_per_paper=int(section.get("max_templates_per_paper", 3)),
        smoke_instances=int(section.get("smoke_instances", 3)),
        executor_cfg=exec_cfg,
        max_concurrency=int(section.get("max_concurrency", 1)),
    )
    try:
        result = run_generation(records, provider, executor, pipeline_cfg)
    finally:
        if hasattr(executor, "close"):
            executor.close()
    log = {
        "api_calls": result.api_calls,
        "papers": [
            {
                "paper_id": o.paper_id,
                "status": o.status,
                "codes": list(o.codes),
                "detail": o.detail,
                "template_ids": list(o.template_ids),
                "drafts": [
                    {"draft_index": d.draft_index, "status": d.status, "detail": d.detail}
                    for d in o.draft_outcomes
                ],
            }
            for o in result.outcomes
        ],
    }
    _write_artifact(cfg, "generate", cfg.path("templates"), dump_templates(result.templates))
    _write_artifact(cfg, "generate", cfg.path("generation_log"), canonical_dumps(log))
    print(f"generate: {len(result.templates)} templates from {len(records)} papers ({result.api_calls} calls)")


def cmd_verify(cfg: RunConfig) -> None:
    templates = load_template_file(cfg.path("templates"))
    executor, exec_cfg = _executor_from_config(cfg)
    try:
        instances, rejections = verify_dataset(templates, _sampler(cfg), exec_cfg, executor)
    finally:
        if hasattr(executor, "close"):
            executor.close()
    corpus_path = cfg.optional_path("corpus")
    if corpus_path is not None:
        threshold = float(cfg.section("dedup").get("threshold", 0.8))
        template_by_instance = {inst.instance_id: inst for inst in instances}
        instances, removed = dedup_filter(instances, load_corpus(corpus_path), threshold)
        for match in removed:
            dropped = template_by_instance[match.instance_id]
            rejections.append(
                RejectionRecord(
                    template_id=dropped.template_id,
                    params_used=dict(dropped.params_used),
                    failures=(
                        (
                            "originality",
                            f"similarity {match.similarity:.4f} to corpus entry {match.corpus_index}",
                        ),
                    ),
                    kind="originality",
                )
            )
    buffer = io.StringIO()
    count = render_dataset(instances, buffer)
    _write_artifact(cfg, "verify", cfg.path("dataset"), buffer.getvalue())
    _write_artifact(cfg, "verify", cfg.path("rejections"), canonical_dumps(render_rejection_log(rejections)))
    print(f"verify: {count} instances kept, {len(rejections)} rejections")


def cmd_stratify(cfg: RunConfig) -> None:
    templates = _load_templates_for(cfg)
    instances = load_dataset(cfg.path("dataset"), templates)
    verdicts = load_verdicts(cfg.path("verdicts"))
    section = cfg.section("tiers")
    thresholds = TierThresholds(
        panel_size=int(section.get("panel_size", 5)),
        hard_max=int(section.get("hard_max", 1)),
        medium_max=int(section.get("medium_max", 3)),
        exclude_if_all_correct_all_trials=bool(section.get("exclude_if_all_correct_all_trials", True)),
    )
    kept, excluded = stratify_dataset(instances, verdicts, thresholds)
    stats = curation_stats(kept) if kept else None
    buffer = io.StringIO()
    render_dataset(kept, buffer)
    summary = {
        "excluded": excluded,
        "kept": len(kept),
        "counts": dict(stats.counts) if stats else {},
        "percentages": dict(stats.percentages) if stats else {},
    }
    _write_artifact(cfg, "stratify", cfg.path("tiered_dataset"), buffer.getvalue())
    _write_artifact(cfg, "stratify", cfg.path("exclusions"), canonical_dumps(summary))
    print(f"stratify: {len(kept)} tiered, {len(excluded)} excluded")


def load_responses(path: Path) -> list[tuple[str, str, str]]:
    """Model responses: JSONL rows {"model_id", "instance_id", "response"}."""
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"responses line {lineno}: invalid JSON: {exc.msg}") from exc
        for key in ("model_id", "instance_id", "response"):
            if key not in record:
                raise EvaluationError(f"responses line {lineno}: missing {key!r}")
        rows.append((str(record["model_id"]), str(record["instance_id"]), str(record["response"])))
    return rows


def cmd_evaluate(cfg: RunConfig) -> None:
    templates = _load_templates_for(cfg)
    dataset_path = cfg.optional_path("tiered_dataset") or cfg.path("dataset")
    instances = load_dataset(dataset_path, templates)
    by_id: dict[str, ProblemInstance] = {inst.instance_id: inst for inst in instances}
    policy = _grading_policy(cfg)
    records = []
    for model_id, instance_id, response in load_responses(cfg.path("responses")):
        if instance_id not in by_id:
            raise EvaluationError(f"response references unknown instance {instance_id}")
        records.append(evaluate_response(model_id, by_id[instance_id], response, policy))
    records.sort(key=lambda r: (r.model_id, r.instance_id))
    _write_artifact(cfg, "evaluate", cfg.path("eval_records"), dump_eval_records(records))
    correct = sum(1 for r in records if r.correct)
    print(f"evaluate: {correct}/{len(records)} responses correct")


def cmd_metrics(cfg: RunConfig) -> None:
    records = load_eval_records(cfg.path("eval_records"))
    if not records:
        raise EvaluationError("no eval records to aggregate")
    meta_raw = json.loads(cfg.path("metrics_meta").read_text(encoding="utf-8"))
    meta = DatasetMeta(
        level_counts=dict(meta_raw.get("level_counts", {})),
        coverage_covered=int(meta_raw["coverage"]["covered"]),
        coverage_total=int(meta_raw["coverage"].get("total", 63)),
        original_count=int(meta_raw["originality"]["original"]),
        total_count=int(meta_raw["originality"]["total"]),
    )
    accuracies = model_accuracies(records)
    stats = AccuracyStats.from_accuracies(list(accuracies.values()))
    metrics = compute_metrics(stats, meta)
    report = {
        "metrics": render_metrics_report(metrics),
        "models": {
            model: {"accuracy": float(acc), "exact": f"{acc.numerator}/{acc.denominator}"}
            for model, acc in accuracies.items()
        },
        "inputs": {
            "level_counts": dict(sorted(meta.level_counts.items())),
            "coverage": {"covered": meta.coverage_covered, "total": meta.coverage_total},
            "originality": {"original": meta.original_count, "total": meta.total_count},
        },
    }
    _write_artifact(cfg, "metrics", cfg.path("metrics"), canonical_dumps(report))
    print(f"metrics: d1={report['metrics']['d1_difficulty']['rounded']}")


AUDIT_HEADER = ("instance_id", "template_id", "problem", "numerical_value", "exact_expression", "verdict", "note")


def cmd_audit_export(cfg: RunConfig, sample_size: int | None = None) -> None:
    dataset_path = cfg.optional_path("tiered_dataset") or cfg.path("dataset")
    instances = load_dataset(dataset_path, _load_templates_for(cfg))
    k = sample_size if sample_size is not None else int(cfg.section("audit").get("sample_size", 100))
    if k > len(instances):
        raise ConfigError(f"audit sample size {k} exceeds dataset size {len(instances)}")
    # partial Fisher-Yates over indices, deterministic in the run seed
    stream = KeyedStream("audit-export", cfg.seed)
    indices = list(range(len(instances)))
    for i in range(k):
        j = i + stream.below(len(indices) - i)
        indices[i], indices[j] = indices[j], indices[i]
    chosen = sorted(indices[:k])
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(AUDIT_HEADER)
    for idx in chosen:
        inst = instances[idx]
        writer.writerow(
            [inst.instance_id, inst.template_id, inst.problem, inst.numerical_value, inst.exact_expression, "", ""]
        )
    _write_artifact(cfg, "audit-export", cfg.path("audit_sample"), out.getvalue())
    print(f"audit-export: {k} of {len(instances)} instances sampled")


def cmd_audit_import(cfg: RunConfig) -> None:
    dataset_path = cfg.optional_path("tiered_dataset") or cfg.path("dataset")
    templates = _load_templates_for(cfg)
    instances = load_dataset(dataset_path, templates)
    text = cfg.path("audit_reviewed").read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != AUDIT_HEADER:
        raise ConfigError(f"reviewed audit file must start with header {','.join(AUDIT_HEADER)}")
    verdicts: dict[str, tuple[str, str]] = {}
    for row in rows[1:]:
        if not row:
            continue
        instance_id, verdict, note = row[0], row[5].strip().lower(), row[6]
        if verdict not in ("", "accept", "reject"):
            raise ConfigError(f"audit verdict for {instance_id} must be accept/reject, got {verdict!r}")
        verdicts[instance_id] = (verdict, note)
    rejected = [iid for iid, (v, _) in verdicts.items() if v == "reject"]
    kept = [inst for inst in instances if inst.instance_id not in set(rejected)]
    buffer = io.StringIO()
    render_dataset(kept, buffer)
    log = {
        "reviewed": len(verdicts),
        "rejected": [
            {"instance_id": iid, "note": verdicts[iid][1]} for iid in sorted(rejected)
        ],
        "kept": len(kept),
    }
    _write_artifact(cfg, "audit-import", cfg.path("audit_dataset"), buffer.getvalue())
    _write_artifact(cfg, "audit-import", cfg.path("audit_log"), canonical_dumps(log))
    print(f"audit-import: {len(kept)} kept, {len(rejected)} rejected")


# --- entry point ------------------------------------------------------------------


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="theorembench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("ingest", "generate", "verify", "stratify", "evaluate", "metrics", "audit-import"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True)
        cmd.add_argument("--seed", type=int, default=None)
    export = sub.add_parser("audit-export")
    export.add_argument("--config", required=True)
    export.add_argument("--seed", type=int, default=None)
    export.add_argument("--sample-size", type=int, default=None)
    return parser


_DISPATCH = {
    "ingest": cmd_ingest,
    "generate": cmd_generate,
    "verify": cmd_verify,
    "stratify": cmd_stratify,
    "evaluate": cmd_evaluate,
    "metrics": cmd_metrics,
    "audit-import": cmd_audit_import,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        if args.command == "audit-export":
            cmd_audit_export(cfg, args.sample_size)
        else:
            _DISPATCH[args.command](cfg)
    except (ConfigError, *_ERROR_TYPES) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, ensure_ascii=False), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
