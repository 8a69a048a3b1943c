from dataclasses import dataclass

import pytest


@dataclass
class CriterionRecord:
    label: str
    measured: str
    target: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.label}: {self.measured} (target {self.target})"


_RECORDS: list[CriterionRecord] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance check; prints now and again in the terminal summary."""

    def record(label: str, passed: bool, measured: str, target: str) -> bool:
        rec = CriterionRecord(label, measured, target, bool(passed))
        _RECORDS.append(rec)
        with request.config.pluginmanager.get_plugin("capturemanager").global_and_fixture_disabled():
            print(f"\n[acceptance] {rec.line()}")
        return rec.passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RECORDS:
        return
    terminalreporter.section("acceptance criteria")
    for rec in _RECORDS:
        terminalreporter.write_line(rec.line())
