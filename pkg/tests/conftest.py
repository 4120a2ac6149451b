from __future__ import annotations

import pytest

from pipeline_harness import PipelineHarness
from theorembench.fixtures_data import fixture_path
from theorembench.instances import load_dataset
from theorembench.templates import load_template_file
from theorembench.verification import MockExecutor


@pytest.fixture(scope="session")
def suite_templates():
    return load_template_file(fixture_path("fixture_suite.template.json"))


@pytest.fixture(scope="session")
def cayley_template():
    templates = load_template_file(fixture_path("cayley_graph_energy.template.json"))
    assert len(templates) == 1
    return templates[0]


@pytest.fixture(scope="session")
def golden_instances(cayley_template):
    return load_dataset(fixture_path("cayley_golden.problems.json"), [cayley_template])


@pytest.fixture
def mock_executor():
    return MockExecutor.from_json(fixture_path("executor_table.json"))


@pytest.fixture
def pipeline(tmp_path):
    return PipelineHarness(tmp_path)


# --- acceptance reporting -------------------------------------------------------


def pytest_terminal_summary(terminalreporter):
    lines = []
    for status in ("passed", "failed"):
        for report in terminalreporter.stats.get(status, []):
            if "tests/test_acceptance.py::test_criterion_" in report.nodeid:
                name = report.nodeid.split("::", 1)[1]
                lines.append((name, status == "passed"))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, ok in sorted(lines):
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}")
