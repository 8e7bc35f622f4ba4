"""Shared fixtures and acceptance-criterion reporting.

Tests marked ``@pytest.mark.criterion(n, "title")`` are the acceptance
gate; the terminal summary prints one PASS/FAIL line per criterion.
"""

import math

import pytest

import twoport as tp

_CRITERIA = {}
_OUTCOMES = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            number, title = marker.args
            _CRITERIA[item.nodeid] = (int(number), str(title))


def _record(number, title, outcome):
    previous = _OUTCOMES.get(number)
    if previous is not None and previous[1] != "passed":
        return
    _OUTCOMES[number] = (title, outcome)


def pytest_runtest_logreport(report):
    if report.nodeid not in _CRITERIA:
        return
    number, title = _CRITERIA[report.nodeid]
    if report.when == "call":
        _record(number, title, report.outcome)
    elif report.when == "setup" and report.outcome != "passed":
        _record(number, title, "error" if report.failed else report.outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        title, outcome = _OUTCOMES[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} [{verdict}] {title}")


@pytest.fixture(scope="session")
def headline_truth():
    return tp.NetworkParams(0.3, 0.8, 0.5, math.pi / 4)


@pytest.fixture(scope="session")
def headline_k():
    return tp.TuningConstants(0.5, 0.5, 0.0)


@pytest.fixture(scope="session")
def headline_split():
    return tp.ResourceSplit(n_total=10.0, beta=0.5)
