"""Canonical JSON rendering shared by every artifact writer.

All persisted files must be byte-stable across runs, so one set of
serialization choices lives here: UTF-8, two-space indent, LF line
endings, a trailing newline, and no ASCII escaping.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_dumps(obj: Any) -> str:
    """Render ``obj`` as canonical pretty JSON (key order = insertion order)."""
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def compact_dumps(obj: Any) -> str:
    """Render ``obj`` as compact JSON with sorted keys, for hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_digest(obj: Any) -> str:
    """sha256 hex digest of the compact canonical form of ``obj``."""
    return hashlib.sha256(compact_dumps(obj).encode("utf-8")).hexdigest()


def text_digest(text: str) -> str:
    """sha256 hex digest of raw text; used to key scripts and transcripts."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
