"""Shared fixtures, plus the acceptance-criteria report.

Acceptance tests record their verdicts through the `criteria` fixture;
the terminal summary then prints exactly one PASS/FAIL line per
criterion, aggregated over every clause that reported against it.
"""

from __future__ import annotations

import pytest


class CriteriaReport:
    def __init__(self):
        self._ok: dict[int, bool] = {}
        self._detail: dict[int, list[str]] = {}

    def record(self, number: int, ok: bool, detail: str) -> None:
        self._ok[number] = self._ok.get(number, True) and bool(ok)
        self._detail.setdefault(number, []).append(detail)

    def check(self, number: int, ok: bool, detail: str) -> None:
        """Record and assert in one step, so the line exists even on failure."""
        self.record(number, ok, detail)
        assert ok, f"criterion {number}: {detail}"

    def lines(self) -> list[str]:
        out = []
        for number in sorted(self._ok):
            word = "PASS" if self._ok[number] else "FAIL"
            out.append(f"criterion {number:2d}: {word}  "
                       f"({'; '.join(self._detail[number])})")
        return out


def pytest_configure(config):
    config._criteria_report = CriteriaReport()


@pytest.fixture(scope="session")
def criteria(request) -> CriteriaReport:
    return request.config._criteria_report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    report = getattr(config, "_criteria_report", None)
    if report is None:
        return
    lines = report.lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
