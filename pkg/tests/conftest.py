"""Acceptance bookkeeping: one PASS/FAIL line per criterion after the run."""
from __future__ import annotations

import pytest

_RESULTS: dict = {}  # label -> [description, ok, notes]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label, description): acceptance criterion covered by a test")
    config.addinivalue_line("markers", "slow: long-running test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    label = mark.args[0]
    entry = _RESULTS.setdefault(label, [mark.args[1] if len(mark.args) > 1 else "", True, []])
    if rep.when == "call" or rep.failed:
        if not rep.passed:
            entry[1] = False
        if rep.when == "call":
            entry[2].extend(f"{v}" for k, v in item.user_properties if k == "measured")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for label, (desc, ok, notes) in _RESULTS.items():
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {desc}"
        if notes:
            line += "  [" + "; ".join(notes) + "]"
        terminalreporter.write_line(line)
