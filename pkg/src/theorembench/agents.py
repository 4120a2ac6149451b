"""Source filtering and the deterministic agent pipeline.

Every model call goes through a Provider. Replay providers answer from
an append-only JSONL transcript keyed by a content digest of (agent
role, canonical request payload); record providers wrap a live provider
and persist each reply, memoizing by digest so a rerun of the same
session replays byte-identically. Pipelines therefore run with zero
network access once a transcript exists.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

from .canonical import content_digest
from .constraints import SamplerConfig, sample_params
from .templates import (
    MetaTemplate,
    TemplateError,
    error_findings,
    extract_placeholders,
    parse_meta_template,
    template_to_payload,
    validate_template,
)
from .verification import ExecutorConfig, SolutionExecutor, apply_validation_rules, build_script

# The 63 top-level MSC2020 subject classes.
MSC_TOP_LEVEL = frozenset(
    """00 01 03 05 06 08 11 12 13 14 15 16 17 18 19 20 22 26 28 30 31 32 33 34 35
    37 39 40 41 42 43 44 45 46 47 49 51 52 53 54 55 57 58 60 62 65 68 70 74 76 78
    80 81 82 83 85 86 90 91 92 93 94 97""".split()
)

# General/history/education: sources in these classes never yield problems.
EXCLUDED_MSC = frozenset({"00", "01", "97"})

COMPUTABLE_FLAGS = ("yes", "no", "unknown")


class AgentError(Exception):
    pass


class ManifestError(AgentError):
    pass


class ProviderError(AgentError):
    pass


class ReplayMiss(AgentError):
    pass


class CorruptTranscript(AgentError):
    pass


class SmokeGateFailure(AgentError):
    def __init__(self, template_id: str, params: Mapping[str, Any], failures: Sequence[tuple[str, str]]):
        self.template_id = template_id
        self.params = dict(params)
        self.failures = list(failures)
        detail = "; ".join(f"{kind}: {msg}" for kind, msg in failures)
        super().__init__(f"template {template_id} failed the smoke gate at {self.params}: {detail}")


# --- source records and filtering ------------------------------------------------


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    title: str
    venue: str
    publication_date: date
    msc_codes: tuple[str, ...] = ()
    computable_flag: str = "unknown"  # yes | no | unknown
    authority_tier: int = 2  # 1 = most authoritative

    def __post_init__(self) -> None:
        if self.computable_flag not in COMPUTABLE_FLAGS:
            raise ManifestError(f"paper {self.paper_id}: bad computable_flag {self.computable_flag!r}")
        for code in self.msc_codes:
            if code not in MSC_TOP_LEVEL:
                raise ManifestError(f"paper {self.paper_id}: invalid subject class {code!r}")
        if self.authority_tier < 1:
            raise ManifestError(f"paper {self.paper_id}: authority_tier must be >= 1")


def load_manifest(source: str | Path) -> list[PaperRecord]:
    """Read a paper manifest: JSON list (or {"papers": [...]}) of records."""
    try:
        payload = json.loads(Path(source).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc.msg} at offset {exc.pos}") from exc
    records = payload.get("papers") if isinstance(payload, Mapping) else payload
    if not isinstance(records, list):
        raise ManifestError("manifest must be a JSON list of paper records")
    papers = []
    seen: set[str] = set()
    for entry in records:
        for key in ("paper_id", "title", "venue", "publication_date"):
            if key not in entry:
                raise ManifestError(f"manifest record missing field {key!r}")
        try:
            pub = date.fromisoformat(entry["publication_date"])
        except ValueError as exc:
            raise ManifestError(f"paper {entry['paper_id']}: bad publication_date: {exc}") from exc
        record = PaperRecord(
            paper_id=str(entry["paper_id"]),
            title=str(entry["title"]),
            venue=str(entry["venue"]),
            publication_date=pub,
            msc_codes=tuple(entry.get("msc_codes", ())),
            computable_flag=str(entry.get("computable_flag", "unknown")),
            authority_tier=int(entry.get("authority_tier", 2)),
        )
        if record.paper_id in seen:
            raise ManifestError(f"duplicate paper_id {record.paper_id!r} in manifest")
        seen.add(record.paper_id)
        papers.append(record)
    return papers


@dataclass(frozen=True)
class FilterPolicy:
    reference_date: date
    max_age_months: int = 24
    min_authority_tier: int = 3  # tiers 1..min accepted
    admit_unknown_computability: bool = False


def months_between(earlier: date, later: date) -> int:
    months = (later.year - earlier.year) * 12 + (later.month - earlier.month)
    if later.day < earlier.day:
        months -= 1
    return months


def filter_papers(
    records: Sequence[PaperRecord],
    policy: FilterPolicy,
) -> tuple[list[PaperRecord], list[tuple[PaperRecord, tuple[str, ...]]]]:
    """Partition records into (accepted, rejected-with-reasons), order kept."""
    accepted: list[PaperRecord] = []
    rejected: list[tuple[PaperRecord, tuple[str, ...]]] = []
    for record in records:
        reasons: list[str] = []
        if months_between(record.publication_date, policy.reference_date) > policy.max_age_months:
            reasons.append("recency")
        if record.authority_tier > policy.min_authority_tier:
            reasons.append("authority")
        if record.computable_flag == "no":
            reasons.append("computability")
        elif record.computable_flag == "unknown" and not policy.admit_unknown_computability:
            reasons.append("computability")
        if reasons:
            rejected.append((record, tuple(reasons)))
        else:
            accepted.append(record)
    return accepted, rejected


# --- transcripts and providers ----------------------------------------------------


def request_digest(role: str, payload: Mapping[str, Any]) -> str:
    return content_digest({"role": role, "payload": payload})


@dataclass(frozen=True)
class TranscriptEntry:
    digest: str
    response: str
    avg_logprob: float | None = None


class Transcript:
    """Append-only digest-keyed store of provider replies."""

    def __init__(self, entries: Iterable[TranscriptEntry] = ()):
        self.entries: dict[str, TranscriptEntry] = {}
        for entry in entries:
            if entry.digest in self.entries:
                raise CorruptTranscript(f"duplicate digest {entry.digest[:12]} in transcript")
            self.entries[entry.digest] = entry

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        entries = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptTranscript(f"line {lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict) or "digest" not in record or "response" not in record:
                raise CorruptTranscript(f"line {lineno}: entry must carry digest and response")
            entries.append(
                TranscriptEntry(
                    digest=str(record["digest"]),
                    response=str(record["response"]),
                    avg_logprob=record.get("avg_logprob"),
                )
            )
        return cls(entries)

    def lookup(self, digest: str) -> TranscriptEntry:
        if digest not in self.entries:
            raise ReplayMiss(f"transcript has no reply for request digest {digest[:12]}")
        return self.entries[digest]

    def save(self, path: str | Path) -> None:
        lines = [
            json.dumps(
                {"digest": e.digest, "response": e.response, "avg_logprob": e.avg_logprob},
                ensure_ascii=False,
            )
            for e in self.entries.values()
        ]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


@dataclass(frozen=True)
class ProviderReply:
    text: str
    avg_logprob: float | None = None


class Provider(Protocol):
    def complete(self, role: str, payload: Mapping[str, Any]) -> ProviderReply: ...


class ReplayProvider:
    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, role: str, payload: Mapping[str, Any]) -> ProviderReply:
        entry = self.transcript.lookup(request_digest(role, payload))
        with self._lock:
            self.calls += 1
        return ProviderReply(entry.response, entry.avg_logprob)


class RecordingProvider:
    """Wraps a live provider; persists replies and memoizes by digest."""

    def __init__(self, inner: Provider, transcript_path: str | Path):
        self.inner = inner
        self.transcript_path = Path(transcript_path)
        self.calls = 0
        self._lock = threading.Lock()
        self._seen: dict[str, TranscriptEntry] = {}
        if self.transcript_path.exists():
            self._seen = dict(Transcript.load(self.transcript_path).entries)

    def complete(self, role: str, payload: Mapping[str, Any]) -> ProviderReply:
        digest = request_digest(role, payload)
        with self._lock:
            cached = self._seen.get(digest)
        if cached is not None:
            return ProviderReply(cached.response, cached.avg_logprob)
        reply = self.inner.complete(role, payload)
        entry = TranscriptEntry(digest, reply.text, reply.avg_logprob)
        with self._lock:
            if digest not in self._seen:  # double-checked: one entry per digest
                self._seen[digest] = entry
                with self.transcript_path.open("a", encoding="utf-8") as sink:
                    sink.write(
                        json.dumps(
                            {"digest": entry.digest, "response": entry.response, "avg_logprob": entry.avg_logprob},
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
            self.calls += 1
        return reply


class HttpProvider:
    """POSTs {"role", "payload"} to one endpoint; bearer token from the env."""

    def __init__(
        self,
        endpoint: str,
        api_key: str,
        session: Any = None,
        retry_attempts: int = 3,
        retry_backoff: float = 0.5,
        timeout_s: float = 60.0,
    ):
        import requests

        self.endpoint = endpoint
        self.api_key = api_key
        self.session = session or requests.Session()
        self.retry_attempts = retry_attempts
        self.retry_backoff = retry_backoff
        self.timeout_s = timeout_s
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, role: str, payload: Mapping[str, Any]) -> ProviderReply:
        import requests

        body = {"role": role, "payload": dict(payload)}
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last_error: Exception | None = None
        for attempt in range(self.retry_attempts):
            try:
                response = self.session.post(self.endpoint, json=body, headers=headers, timeout=self.timeout_s)
                if response.status_code >= 500:
                    raise requests.HTTPError(f"server error {response.status_code}")
                response.raise_for_status()
                data = response.json()
                if "response" not in data:
                    raise ProviderError("provider reply carries no 'response' field")
                with self._lock:
                    self.calls += 1
                return ProviderReply(str(data["response"]), data.get("avg_logprob"))
            except ProviderError:
                raise
            except Exception as exc:  # request/HTTP/JSON errors: retry with backoff
                last_error = exc
                if attempt + 1 < self.retry_attempts:
                    time.sleep(self.retry_backoff * (2**attempt))
        raise ProviderError(f"provider request failed after {self.retry_attempts} attempts: {last_error}")


@dataclass
class ProviderConfig:
    mode: str = "replay"  # replay | record | live
    endpoint: str | None = None
    credentials_env: str = "THEOREMBENCH_API_KEY"
    transcript_path: str | None = None
    max_concurrency: int = 4
    retry_attempts: int = 3
    retry_backoff: float = 0.5


def build_provider(cfg: ProviderConfig, session: Any = None) -> Provider:
    if cfg.mode == "replay":
        if not cfg.transcript_path:
            raise ProviderError("replay mode requires a transcript path")
        return ReplayProvider(Transcript.load(cfg.transcript_path))
    if cfg.mode in ("live", "record"):
        if not cfg.endpoint:
            raise ProviderError(f"{cfg.mode} mode requires an endpoint")
        api_key = os.environ.get(cfg.credentials_env, "")
        if not api_key:
            raise ProviderError(f"{cfg.mode} mode requires credentials in ${cfg.credentials_env}")
        live = HttpProvider(
            cfg.endpoint,
            api_key,
            session=session,
            retry_attempts=cfg.retry_attempts,
            retry_backoff=cfg.retry_backoff,
        )
        if cfg.mode == "live":
            return live
        if not cfg.transcript_path:
            raise ProviderError("record mode requires a transcript path")
        return RecordingProvider(live, cfg.transcript_path)
    raise ProviderError(f"unknown provider mode {cfg.mode!r}")


# --- agents -------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassificationResult:
    codes: tuple[str, ...]
    excluded: bool
    reason: str | None = None
    warnings: tuple[str, ...] = ()


def _parse_codes(text: str) -> tuple[str, ...]:
    import re

    seen: list[str] = []
    for token in re.findall(r"\b\d{2}\b", text):
        if token in MSC_TOP_LEVEL and token not in seen:
            seen.append(token)
    return tuple(seen)


def classify_paper(record: PaperRecord, provider: Provider) -> ClassificationResult:
    """Subject classes for one paper; author-provided codes take priority."""
    warnings: list[str] = []
    if record.msc_codes:
        codes = tuple(dict.fromkeys(record.msc_codes))
    else:
        reply = provider.complete(
            "classification",
            {"paper_id": record.paper_id, "title": record.title, "venue": record.venue},
        )
        codes = _parse_codes(reply.text)
    if len(codes) > 3:
        warnings.append(f"{len(codes)} codes returned, keeping the first 3")
        codes = codes[:3]
    if not codes:
        return ClassificationResult((), True, "no valid subject class parsed", tuple(warnings))
    banned = sorted(set(codes) & EXCLUDED_MSC)
    if banned:
        return ClassificationResult(codes, True, f"excluded subject class {', '.join(banned)}", tuple(warnings))
    return ClassificationResult(codes, False, None, tuple(warnings))


@dataclass(frozen=True)
class LogprobScreen:
    threshold: float = -0.5  # drafts with avg_logprob below this are dropped


@dataclass(frozen=True)
class DraftOutcome:
    draft_index: int
    status: str  # kept | screened | parse_error | invalid | duplicate
    detail: str | None = None


def generate_templates(
    record: PaperRecord,
    provider: Provider,
    screen: LogprobScreen | None = None,
    max_drafts: int = 5,
    max_templates: int = 3,
) -> tuple[list[MetaTemplate], list[DraftOutcome]]:
    """Draft meta-templates for one paper, screened and validated.

    One provider request per draft (each reply carries one avg_logprob).
    Drafting stops as soon as max_templates survivors exist.
    """
    screen = screen or LogprobScreen()
    survivors: list[MetaTemplate] = []
    outcomes: list[DraftOutcome] = []
    seen_ids: set[str] = set()
    for index in range(max_drafts):
        reply = provider.complete("meta_template", {"paper_id": record.paper_id, "draft_index": index})
        if reply.avg_logprob is not None and reply.avg_logprob < screen.threshold:
            outcomes.append(DraftOutcome(index, "screened", f"avg_logprob {reply.avg_logprob}"))
            continue
        try:
            template = parse_meta_template(reply.text)
        except TemplateError as exc:
            outcomes.append(DraftOutcome(index, "parse_error", str(exc)))
            continue
        errors = error_findings(validate_template(template))
        if errors:
            outcomes.append(DraftOutcome(index, "invalid", "; ".join(f.detail for f in errors)))
            continue
        if template.template_id in seen_ids:
            outcomes.append(DraftOutcome(index, "duplicate", template.template_id))
            continue
        seen_ids.add(template.template_id)
        survivors.append(template)
        outcomes.append(DraftOutcome(index, "kept", template.template_id))
        if len(survivors) >= max_templates:
            break
    return survivors, outcomes


def translate_to_code(
    t: MetaTemplate,
    provider: Provider,
    executor: SolutionExecutor,
    seed: int,
    smoke_instances: int = 3,
    executor_cfg: ExecutorConfig | None = None,
) -> MetaTemplate:
    """Replace the formal solution with provider-written code, smoke-tested.

    The smoke gate samples bindings with the run seed (so they coincide
    with the first verification bindings), executes each script, and
    applies the template's execution/value rules; any failure raises
    SmokeGateFailure rather than letting a broken script into the corpus.
    """
    executor_cfg = executor_cfg or ExecutorConfig()
    reply = provider.complete(
        "code_translation",
        {"template_id": t.template_id, "template": template_to_payload(t)},
    )
    candidate = t.with_formal_solution(reply.text)
    declared = {p.var_name for p in candidate.param_definitions}
    stray = extract_placeholders(candidate.formal_solution) - declared
    if stray:
        raise SmokeGateFailure(t.template_id, {}, [("script", f"undeclared placeholders {sorted(stray)}")])
    sampler = SamplerConfig(seed=seed, instances_per_template=smoke_instances)
    for binding in sample_params(candidate, sampler):
        script = build_script(candidate, binding)
        result = executor.run(script, executor_cfg.timeout_s, executor_cfg.memory_mb)
        verdict = apply_validation_rules(candidate, binding, result)
        if not verdict.accepted:
            raise SmokeGateFailure(t.template_id, binding.assignments, verdict.failures)
    return candidate


# --- full generation pass -------------------------------------------------------------


@dataclass
class PipelineConfig:
    seed: int
    screen: LogprobScreen = field(default_factory=LogprobScreen)
    max_drafts: int = 5
    max_templates_per_paper: int = 3
    smoke_instances: int = 3
    executor_cfg: ExecutorConfig = field(default_factory=ExecutorConfig)
    max_concurrency: int = 1


@dataclass(frozen=True)
class PaperOutcome:
    paper_id: str
    status: str  # ok | excluded | no_templates
    codes: tuple[str, ...] = ()
    detail: str | None = None
    template_ids: tuple[str, ...] = ()
    draft_outcomes: tuple[DraftOutcome, ...] = ()


@dataclass
class GenerationResult:
    templates: list[MetaTemplate]
    outcomes: list[PaperOutcome]
    api_calls: int


def _process_paper(
    record: PaperRecord,
    provider: Provider,
    executor: SolutionExecutor,
    cfg: PipelineConfig,
) -> tuple[PaperOutcome, list[MetaTemplate]]:
    classification = classify_paper(record, provider)
    if classification.excluded:
        return (
            PaperOutcome(record.paper_id, "excluded", classification.codes, classification.reason),
            [],
        )
    drafts, outcomes = generate_templates(
        record, provider, cfg.screen, cfg.max_drafts, cfg.max_templates_per_paper
    )
    translated: list[MetaTemplate] = []
    failures: list[str] = []
    for template in drafts:
        try:
            translated.append(
                translate_to_code(
                    template,
                    provider,
                    executor,
                    seed=cfg.seed,
                    smoke_instances=cfg.smoke_instances,
                    executor_cfg=cfg.executor_cfg,
                )
            )
        except SmokeGateFailure as exc:
            failures.append(str(exc))
    if not translated:
        detail = "; ".join(failures) if failures else "no draft survived screening and validation"
        return (
            PaperOutcome(
                record.paper_id, "no_templates", classification.codes, detail, (), tuple(outcomes)
            ),
            [],
        )
    # classification codes ride along as provenance for breadth metrics
    stamped = [
        replace(t, extras={**t.extras, "msc_codes": list(classification.codes)}) for t in translated
    ]
    return (
        PaperOutcome(
            record.paper_id,
            "ok",
            classification.codes,
            "; ".join(failures) if failures else None,
            tuple(t.template_id for t in stamped),
            tuple(outcomes),
        ),
        stamped,
    )


def run_generation(
    records: Sequence[PaperRecord],
    provider: Provider,
    executor: SolutionExecutor,
    cfg: PipelineConfig,
) -> GenerationResult:
    """Classify, draft, and translate templates for every accepted paper."""
    ordered = sorted(records, key=lambda r: r.paper_id)
    results: dict[str, tuple[PaperOutcome, list[MetaTemplate]]] = {}
    if cfg.max_concurrency > 1 and len(ordered) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.max_concurrency) as pool:
            futures = {
                record.paper_id: pool.submit(_process_paper, record, provider, executor, cfg)
                for record in ordered
            }
            for paper_id, future in futures.items():
                results[paper_id] = future.result()
    else:
        for record in ordered:
            results[record.paper_id] = _process_paper(record, provider, executor, cfg)

    templates: list[MetaTemplate] = []
    outcomes: list[PaperOutcome] = []
    for record in ordered:
        outcome, paper_templates = results[record.paper_id]
        outcomes.append(outcome)
        templates.extend(paper_templates)
    templates.sort(key=lambda t: t.template_id)
    api_calls = getattr(provider, "calls", 0)
    return GenerationResult(templates=templates, outcomes=outcomes, api_calls=api_calls)
