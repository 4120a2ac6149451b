"""Access to packaged fixture data files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def fixture_path(*parts: str) -> Path:
    """Filesystem path of a packaged fixture, e.g. fixture_path("executor_jobs.json")."""
    root = resources.files("theorembench") / "fixtures"
    for part in parts:
        root = root / part
    path = Path(str(root))
    if not path.exists():
        raise FileNotFoundError(f"fixture {'/'.join(parts)} is not packaged")
    return path


def fixture_text(*parts: str) -> str:
    return fixture_path(*parts).read_text(encoding="utf-8")
