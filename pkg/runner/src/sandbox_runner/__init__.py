"""Sandboxed script worker speaking a line-delimited JSON protocol.

One request object per stdin line ({job_id, script, timeout_s,
memory_mb}), exactly one reply per stdout line ({job_id, status, value,
stdout, diagnostic, duration_ms}). Scripts run in a forked child under
an address-space ceiling and a wall-clock kill, inside a namespace that
exposes arithmetic and math libraries but no file or network access.
"""

from __future__ import annotations

from .runner import ALLOWED_MODULES, RunnerJob, run_job, serialize_value, serve

__all__ = ["ALLOWED_MODULES", "RunnerJob", "run_job", "serialize_value", "serve"]

__version__ = "0.1.0"
