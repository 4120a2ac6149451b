from __future__ import annotations


def pytest_terminal_summary(terminalreporter):
    lines = []
    for status in ("passed", "failed"):
        for report in terminalreporter.stats.get(status, []):
            if "test_runner_acceptance.py::test_criterion_" in report.nodeid:
                name = report.nodeid.split("::", 1)[1]
                lines.append((name, status == "passed"))
    if lines:
        terminalreporter.write_sep("-", "runner acceptance criteria")
        for name, ok in sorted(lines):
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}")
