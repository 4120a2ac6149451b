"""Worker loop and per-job sandbox.

Each job forks a child process: the fork gets an address-space ceiling
(RLIMIT_AS), a namespace whose builtins cannot open files or sockets,
and a guarded __import__ restricted to math-oriented modules. The
parent enforces the wall clock and kills overrunning children, so a
runaway script can never wedge the worker.
"""

from __future__ import annotations

import contextlib
import io
import json
import math
import multiprocessing
import re
import resource
import sys
import time
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import IO, Any

ALLOWED_MODULES = frozenset(
    {
        "math",
        "cmath",
        "fractions",
        "decimal",
        "statistics",
        "itertools",
        "functools",
        "operator",
        "sympy",
        "numpy",
    }
)

# integer, float (optional exponent), or p/q rational
_NUMERIC_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?|[+-]?\d+\s*/\s*\d+")

_STDOUT_LIMIT = 16_384

_SAFE_BUILTIN_NAMES = (
    "abs",
    "all",
    "any",
    "bin",
    "bool",
    "chr",
    "complex",
    "dict",
    "divmod",
    "enumerate",
    "filter",
    "float",
    "format",
    "frozenset",
    "hash",
    "hex",
    "int",
    "isinstance",
    "issubclass",
    "iter",
    "len",
    "list",
    "map",
    "max",
    "min",
    "next",
    "oct",
    "ord",
    "pow",
    "print",
    "range",
    "repr",
    "reversed",
    "round",
    "set",
    "slice",
    "sorted",
    "str",
    "sum",
    "tuple",
    "zip",
    "__build_class__",
    "ArithmeticError",
    "AssertionError",
    "AttributeError",
    "Exception",
    "IndexError",
    "KeyError",
    "LookupError",
    "NameError",
    "OverflowError",
    "RecursionError",
    "RuntimeError",
    "StopIteration",
    "TypeError",
    "ValueError",
    "ZeroDivisionError",
)


class RequestError(Exception):
    """The request line cannot be turned into a runnable job."""


@dataclass(frozen=True)
class RunnerJob:
    job_id: str
    script: str
    timeout_s: float = 30.0
    memory_mb: int = 512


def _guarded_import(name: str, globals: Any = None, locals: Any = None, fromlist: Any = (), level: int = 0):
    root = name.split(".")[0]
    if level != 0 or root not in ALLOWED_MODULES:
        raise ImportError(f"import of {name!r} is not permitted in the sandbox")
    return __import__(name, globals, locals, fromlist, level)


def _sandbox_builtins() -> dict[str, Any]:
    import builtins

    table = {name: getattr(builtins, name) for name in _SAFE_BUILTIN_NAMES}
    table["__import__"] = _guarded_import
    return table


def serialize_value(value: Any) -> str:
    """Decimal-string form of a script result; raises ValueError otherwise."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            raise ValueError(f"result {value!r} is not a finite number")
        return repr(value)
    if isinstance(value, (Fraction, Decimal)):
        return str(value)
    text = str(value).strip()
    if _NUMERIC_RE.fullmatch(text):
        return text
    raise ValueError(f"result of type {type(value).__name__} is not numeric")


def _last_numeric_line(captured: str) -> str | None:
    for line in reversed(captured.splitlines()):
        token = line.strip()
        if token and _NUMERIC_RE.fullmatch(token):
            return token
    return None


def _truncate(text: str) -> str:
    if len(text) <= _STDOUT_LIMIT:
        return text
    return text[:_STDOUT_LIMIT] + "...[truncated]"


def _child_main(conn, script: str, memory_mb: int) -> None:
    try:
        ceiling = memory_mb << 20
        resource.setrlimit(resource.RLIMIT_AS, (ceiling, ceiling))
    except (ValueError, OSError):
        pass  # requested ceiling above the hard limit: keep the inherited one
    buffer = io.StringIO()
    payload: dict[str, Any] = {"status": "success", "value": None, "stdout": "", "diagnostic": None}
    try:
        namespace: dict[str, Any] = {"__builtins__": _sandbox_builtins(), "__name__": "__sandbox__"}
        with contextlib.redirect_stdout(buffer):
            exec(compile(script, "<job>", "exec"), namespace)
        captured = buffer.getvalue()
        payload["stdout"] = _truncate(captured)
        if "result" in namespace:
            payload["value"] = serialize_value(namespace["result"])
        else:
            payload["value"] = _last_numeric_line(captured)
            if payload["value"] is None:
                raise ValueError("script bound no `result` and printed no numeric line")
    except BaseException as exc:  # every failure is reported in-band
        payload["status"] = "error"
        payload["value"] = None
        payload["stdout"] = _truncate(buffer.getvalue())
        payload["diagnostic"] = f"{type(exc).__name__}: {exc}"
    try:
        conn.send(payload)
    except (BrokenPipeError, OSError):
        pass


def run_job(job: RunnerJob) -> dict[str, Any]:
    """Execute one job in a fresh resource-limited child; always replies."""
    start = time.monotonic()
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else "spawn")
    parent_conn, child_conn = ctx.Pipe(duplex=False)
    proc = ctx.Process(target=_child_main, args=(child_conn, job.script, job.memory_mb), daemon=True)
    proc.start()
    child_conn.close()
    proc.join(job.timeout_s)
    if proc.is_alive():
        proc.terminate()
        proc.join(0.5)
        if proc.is_alive():
            proc.kill()
            proc.join()
        parent_conn.close()
        duration_ms = int((time.monotonic() - start) * 1000)
        return {
            "job_id": job.job_id,
            "status": "timeout",
            "value": None,
            "stdout": "",
            "diagnostic": "wall clock limit exceeded",
            "duration_ms": duration_ms,
        }
    if parent_conn.poll():
        payload = parent_conn.recv()
    else:
        payload = {
            "status": "error",
            "value": None,
            "stdout": "",
            "diagnostic": f"worker exited without reply (exit code {proc.exitcode})",
        }
    parent_conn.close()
    duration_ms = int((time.monotonic() - start) * 1000)
    return {
        "job_id": job.job_id,
        "status": payload["status"],
        "value": payload["value"],
        "stdout": payload["stdout"],
        "diagnostic": payload["diagnostic"],
        "duration_ms": duration_ms,
    }


def parse_request(line: str) -> RunnerJob:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RequestError(f"request is not valid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise RequestError("request must be a JSON object")
    job_id = raw.get("job_id")
    if not isinstance(job_id, str) or not job_id:
        raise RequestError("request requires a non-empty string job_id")
    script = raw.get("script")
    if not isinstance(script, str) or not script.strip():
        raise RequestError("request requires a non-empty script")
    timeout_s = raw.get("timeout_s", 30.0)
    if not isinstance(timeout_s, (int, float)) or isinstance(timeout_s, bool) or timeout_s <= 0:
        raise RequestError("timeout_s must be a positive number")
    memory_mb = raw.get("memory_mb", 512)
    if not isinstance(memory_mb, int) or isinstance(memory_mb, bool) or memory_mb <= 0:
        raise RequestError("memory_mb must be a positive integer")
    return RunnerJob(job_id=job_id, script=script, timeout_s=float(timeout_s), memory_mb=memory_mb)


def _error_reply(line: str, message: str) -> dict[str, Any]:
    # best effort to echo the job_id even when the request is rejected
    job_id = None
    try:
        raw = json.loads(line)
        if isinstance(raw, dict) and isinstance(raw.get("job_id"), str):
            job_id = raw["job_id"]
    except json.JSONDecodeError:
        pass
    return {
        "job_id": job_id,
        "status": "error",
        "value": None,
        "stdout": "",
        "diagnostic": message,
        "duration_ms": 0,
    }


def handle_line(line: str) -> dict[str, Any]:
    try:
        job = parse_request(line)
    except RequestError as exc:
        return _error_reply(line, str(exc))
    return run_job(job)


def serve(stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> int:
    """Serve jobs until EOF; one reply line per request line, always."""
    inp = stdin if stdin is not None else sys.stdin
    out = stdout if stdout is not None else sys.stdout
    for line in inp:
        if not line.strip():
            continue
        reply = handle_line(line)
        try:
            out.write(json.dumps(reply, ensure_ascii=False) + "\n")
            out.flush()
        except (BrokenPipeError, OSError):
            return 0
    return 0


def main() -> int:
    return serve()


if __name__ == "__main__":
    sys.exit(main())
