from __future__ import annotations

import pytest

# criterion number -> (title, outcomes of its tests)
_CRITERIA: dict[int, tuple[str, list[bool]]] = {}
_OWNER: dict[str, int] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion a test checks")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            number, title = mark.args
            _CRITERIA.setdefault(number, (title, []))
            _OWNER[item.nodeid] = number


def pytest_runtest_logreport(report):
    number = _OWNER.get(report.nodeid)
    if number is None:
        return
    if report.when == "call" or report.failed or report.skipped:
        _CRITERIA[number][1].append(report.passed and report.when == "call")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        verdict = "PASS" if outcomes and all(outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number} ({title}): {verdict}")
