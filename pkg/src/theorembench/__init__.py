"""Theorem-grounded benchmark construction and evaluation.

Pipeline stages: filter source papers, draft parameterized problem
templates through record/replay agents, sample and execution-verify
concrete instances, stratify difficulty against a model panel, grade
final answers exactly, and aggregate benchmark-quality metrics.
"""

from .constraints import ParamBinding, SamplerConfig, parse_constraint, sample_params
from .curation import TierThresholds, curation_stats, dedup_filter, stratify
from .evaluation import (
    AccuracyStats,
    BenchmarkMetrics,
    GradingPolicy,
    compute_metrics,
    extract_final_answer,
    grade_answer,
)
from .expressions import evaluate_expression
from .instances import ProblemInstance, instantiate, load_dataset, render_dataset, substitute_placeholders
from .templates import MetaTemplate, OutputKind, parse_meta_template, serialize_meta_template, validate_template
from .verification import (
    ExecutionResult,
    ExecutorConfig,
    MockExecutor,
    SubprocessExecutor,
    apply_validation_rules,
    verify_instance,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyStats",
    "BenchmarkMetrics",
    "ExecutionResult",
    "ExecutorConfig",
    "GradingPolicy",
    "MetaTemplate",
    "MockExecutor",
    "OutputKind",
    "ParamBinding",
    "ProblemInstance",
    "SamplerConfig",
    "SubprocessExecutor",
    "TierThresholds",
    "apply_validation_rules",
    "compute_metrics",
    "curation_stats",
    "dedup_filter",
    "evaluate_expression",
    "extract_final_answer",
    "grade_answer",
    "instantiate",
    "load_dataset",
    "parse_constraint",
    "parse_meta_template",
    "render_dataset",
    "sample_params",
    "serialize_meta_template",
    "stratify",
    "substitute_placeholders",
    "validate_template",
    "verify_instance",
]
