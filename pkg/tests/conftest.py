"""Shared fixtures; collects the acceptance verdict lines for the summary."""
from __future__ import annotations

import logging

import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(autouse=True)
def _quiet_scenario_warnings():
    # Inadmissible exponents are legitimate in tests; keep the log readable.
    logging.getLogger("oldreg.scenario").setLevel(logging.ERROR)
    yield
    logging.getLogger("oldreg.scenario").setLevel(logging.NOTSET)


@pytest.fixture
def verdict():
    """Record ``(criterion, ok, detail)``, print it and return ``ok``."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
