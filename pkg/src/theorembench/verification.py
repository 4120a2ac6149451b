"""Execution-backed verification of sampled template instances.

Scripts run through a SolutionExecutor. The production executor talks a
line-delimited JSON protocol to a pooled runner child process (one
request object per line on stdin, exactly one reply per line on stdout,
values as decimal strings). A table-driven mock keyed by script digest
serves hermetic tests and replay runs.
"""

from __future__ import annotations

import json
import re
import select
import subprocess
import sys
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

from .canonical import text_digest
from .constraints import ParamBinding, SamplerConfig, param_violations, sample_params
from .expressions import ExpressionError, evaluate_expression
from .instances import ProblemInstance, UnresolvedPlaceholder, _jsonable_params, _leftover_declared, instantiate
from .instances import substitute_placeholders
from .templates import MetaTemplate

VALID_STATUSES = ("success", "error", "timeout")


class VerificationError(Exception):
    pass


class RunnerUnavailable(VerificationError):
    pass


class ProtocolViolation(VerificationError):
    pass


class UnparseableRule(VerificationError):
    pass


@dataclass(frozen=True)
class ExecutionResult:
    status: str  # success | error | timeout
    value: str | None = None
    stdout: str = ""
    diagnostic: str | None = None
    duration_ms: int = 0  # in-memory diagnostics only, never persisted


@dataclass
class ExecutorConfig:
    timeout_s: float = 30.0
    memory_mb: int = 512
    runner_command: tuple[str, ...] = (sys.executable, "-m", "sandbox_runner")
    max_workers: int = 1
    reply_grace_s: float = 10.0  # extra wait beyond the runner's own timeout


class SolutionExecutor(Protocol):
    def run(self, script: str, timeout_s: float, memory_mb: int) -> ExecutionResult: ...


class MockExecutor:
    """Table-driven executor: sha256(script) -> scripted ExecutionResult.

    A missing entry raises RunnerUnavailable; a miss is a fixture gap and
    must never be silently faked.
    """

    def __init__(self, table: Mapping[str, ExecutionResult] | None = None):
        self.table: dict[str, ExecutionResult] = dict(table or {})
        self.calls = 0

    def add(
        self,
        script: str,
        status: str,
        value: str | None = None,
        stdout: str = "",
        diagnostic: str | None = None,
    ) -> None:
        self.table[text_digest(script)] = ExecutionResult(status, value, stdout, diagnostic)

    @classmethod
    def from_json(cls, path: str | Path) -> "MockExecutor":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        executor = cls()
        for job in payload["jobs"]:
            executor.add(
                job["script"],
                job["status"],
                job.get("value"),
                job.get("stdout", ""),
                job.get("diagnostic"),
            )
        return executor

    def run(self, script: str, timeout_s: float = 30.0, memory_mb: int = 512) -> ExecutionResult:
        digest = text_digest(script)
        if digest not in self.table:
            raise RunnerUnavailable(f"no scripted reply for script digest {digest[:12]}")
        self.calls += 1
        return self.table[digest]


class SubprocessExecutor:
    """One persistent runner worker child, line-delimited JSON protocol."""

    def __init__(self, cfg: ExecutorConfig | None = None):
        self.cfg = cfg or ExecutorConfig()
        self._proc: subprocess.Popen[str] | None = None
        self._lock = threading.Lock()
        self._counter = 0

    def _spawn(self) -> subprocess.Popen[str]:
        try:
            return subprocess.Popen(
                list(self.cfg.runner_command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise RunnerUnavailable(f"failed to start runner {self.cfg.runner_command}: {exc}") from exc

    def _worker(self) -> subprocess.Popen[str]:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = self._spawn()
        return self._proc

    def _read_reply_line(self, proc: subprocess.Popen[str], deadline: float) -> str:
        assert proc.stdout is not None
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                break
            ready, _, _ = select.select([proc.stdout], [], [], min(remaining, 0.5))
            if ready:
                line = proc.stdout.readline()
                if line:
                    return line
                break  # EOF: worker died
            if proc.poll() is not None:
                break
        self._kill()
        raise RunnerUnavailable("runner worker produced no reply before the grace deadline")

    def _kill(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def run(self, script: str, timeout_s: float | None = None, memory_mb: int | None = None) -> ExecutionResult:
        timeout_s = self.cfg.timeout_s if timeout_s is None else timeout_s
        memory_mb = self.cfg.memory_mb if memory_mb is None else memory_mb
        with self._lock:
            proc = self._worker()
            self._counter += 1
            job_id = f"job-{self._counter}"
            request = {"job_id": job_id, "script": script, "timeout_s": timeout_s, "memory_mb": memory_mb}
            assert proc.stdin is not None
            try:
                proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                self._kill()
                raise RunnerUnavailable(f"runner worker rejected the request: {exc}") from exc
            deadline = time.monotonic() + timeout_s + self.cfg.reply_grace_s
            line = self._read_reply_line(proc, deadline)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"reply is not valid JSON: {line!r}") from exc
        if not isinstance(reply, dict):
            raise ProtocolViolation(f"reply must be an object, got {type(reply).__name__}")
        if reply.get("job_id") != job_id:
            raise ProtocolViolation(f"reply job_id {reply.get('job_id')!r} does not match request {job_id!r}")
        status = reply.get("status")
        if status not in VALID_STATUSES:
            raise ProtocolViolation(f"reply has invalid status {status!r}")
        value = reply.get("value")
        if value is not None and not isinstance(value, str):
            raise ProtocolViolation("reply value must be a decimal string or null")
        return ExecutionResult(
            status=status,
            value=value,
            stdout=str(reply.get("stdout", "")),
            diagnostic=reply.get("diagnostic"),
            duration_ms=int(reply.get("duration_ms", 0)),
        )

    def close(self) -> None:
        with self._lock:
            if self._proc is not None:
                if self._proc.stdin is not None:
                    try:
                        self._proc.stdin.close()
                    except OSError:
                        pass
                try:
                    self._proc.wait(timeout=2.0)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
                self._proc = None

    def __enter__(self) -> "SubprocessExecutor":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def execute_solution(
    script: str,
    b: ParamBinding,
    cfg: ExecutorConfig,
    executor: SolutionExecutor | None = None,
) -> ExecutionResult:
    """Run one already-substituted script; b is kept for provenance only."""
    del b
    if executor is None:
        with SubprocessExecutor(cfg) as owned:
            return owned.run(script, cfg.timeout_s, cfg.memory_mb)
    return executor.run(script, cfg.timeout_s, cfg.memory_mb)


# --- validation rules ---------------------------------------------------------

_VALUE_RULE_RE = re.compile(r"^\s*result\s*(?P<op><=|>=|==|≤|≥|=|<|>)\s*(?P<constant>.+?)\s*$")

_OP_TABLE = {
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "≤": lambda a, b: a <= b,
    "≥": lambda a, b: a >= b,
    "=": lambda a, b: a == b,
    "==": lambda a, b: a == b,
}


def parse_value_rule(rule_text: str):
    """``result OP constant`` -> (op symbol, exact constant value)."""
    m = _VALUE_RULE_RE.match(rule_text)
    if not m:
        raise UnparseableRule(f"value_check rule {rule_text!r} does not match 'result OP constant'")
    try:
        constant = evaluate_expression(m.group("constant"))
    except ExpressionError as exc:
        raise UnparseableRule(f"value_check constant in {rule_text!r}: {exc}") from exc
    return m.group("op"), constant


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    failures: tuple[tuple[str, str], ...] = ()  # (rule kind, detail)


@dataclass(frozen=True)
class RejectionRecord:
    template_id: str
    params_used: dict[str, Any]
    failures: tuple[tuple[str, str], ...]
    kind: str = "validation"

    def to_payload(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "template_id": self.template_id,
            "params_used": self.params_used,
            "failures": [{"type": k, "detail": d} for k, d in self.failures],
        }


def apply_validation_rules(t: MetaTemplate, b: ParamBinding, r: ExecutionResult) -> Verdict:
    """Evaluate every validation rule; the verdict lists each failed rule."""
    from .constraints import UnparseableConstraint, parse_constraint

    failures: list[tuple[str, str]] = []

    param_rules = t.rules_of_kind("param_check")
    if param_rules:
        for rule in param_rules:
            try:
                parse_constraint(rule.rule)
            except UnparseableConstraint as exc:
                raise UnparseableRule(f"param_check rule {rule.rule!r}: {exc}") from exc
        for detail in param_violations(b, t):
            failures.append(("param_check", detail))

    for _ in t.rules_of_kind("execution_check"):
        if r.status != "success":
            detail = f"execution status {r.status}"
            if r.diagnostic:
                detail += f": {r.diagnostic}"
            failures.append(("execution_check", detail))
        break  # one execution, one failure entry at most

    for rule in t.rules_of_kind("value_check"):
        op, constant = parse_value_rule(rule.rule)
        if r.status != "success" or r.value is None:
            failures.append(("value_check", f"no value to check against {rule.rule!r}"))
            continue
        try:
            actual = Fraction(r.value)
        except (ValueError, ZeroDivisionError):
            failures.append(("value_check", f"executor value {r.value!r} is not numeric"))
            continue
        if not _OP_TABLE[op](actual, constant):
            failures.append(("value_check", f"{r.value} violates {rule.rule!r}"))

    return Verdict(accepted=not failures, failures=tuple(failures))


def build_script(t: MetaTemplate, b: ParamBinding) -> str:
    """Substitute a binding into the template's formal solution."""
    script = substitute_placeholders(t.formal_solution, b.assignments)
    declared = [p.var_name for p in t.param_definitions]
    leftovers = _leftover_declared(script, declared)
    if leftovers:
        raise UnresolvedPlaceholder(leftovers)
    return script


def verify_instance(
    t: MetaTemplate,
    b: ParamBinding,
    cfg: ExecutorConfig,
    executor: SolutionExecutor | None = None,
) -> ProblemInstance | RejectionRecord:
    """Execute one binding and either materialize an instance or reject it."""
    script = build_script(t, b)
    result = execute_solution(script, b, cfg, executor)
    verdict = apply_validation_rules(t, b, result)
    if not verdict.accepted:
        return RejectionRecord(
            template_id=t.template_id,
            params_used=_jsonable_params(b.assignments),
            failures=verdict.failures,
        )
    return instantiate(t, b, result)


def verify_dataset(
    templates: Sequence[MetaTemplate],
    sampler: SamplerConfig,
    cfg: ExecutorConfig,
    executor: SolutionExecutor | None = None,
) -> tuple[list[ProblemInstance], list[RejectionRecord]]:
    """Sample, execute, and validate every template; deterministic order.

    With no injected executor, runs through max_workers pooled runner
    workers; results are sorted afterwards so concurrency never changes
    the artifacts.
    """
    jobs: list[tuple[MetaTemplate, ParamBinding]] = []
    for t in sorted(templates, key=lambda t: t.template_id):
        for b in sample_params(t, sampler):
            jobs.append((t, b))

    outcomes: list[ProblemInstance | RejectionRecord] = []
    if executor is not None or cfg.max_workers <= 1:
        if executor is None:
            with SubprocessExecutor(cfg) as owned:
                outcomes = [verify_instance(t, b, cfg, owned) for t, b in jobs]
        else:
            outcomes = [verify_instance(t, b, cfg, executor) for t, b in jobs]
    else:
        from concurrent.futures import ThreadPoolExecutor
        from queue import Queue

        workers: Queue[SubprocessExecutor] = Queue()
        pool = [SubprocessExecutor(cfg) for _ in range(cfg.max_workers)]
        for w in pool:
            workers.put(w)

        def run_job(job: tuple[MetaTemplate, ParamBinding]) -> ProblemInstance | RejectionRecord:
            worker = workers.get()
            try:
                return verify_instance(job[0], job[1], cfg, worker)
            finally:
                workers.put(worker)

        try:
            with ThreadPoolExecutor(max_workers=cfg.max_workers) as tp:
                outcomes = list(tp.map(run_job, jobs))
        finally:
            for w in pool:
                w.close()

    instances = [o for o in outcomes if isinstance(o, ProblemInstance)]
    rejections = [o for o in outcomes if isinstance(o, RejectionRecord)]
    return instances, rejections


def render_rejection_log(rejections: Iterable[RejectionRecord]) -> list[dict[str, Any]]:
    return [r.to_payload() for r in rejections]
