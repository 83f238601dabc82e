"""Per-criterion pass/fail reporting for the acceptance suite.

Tests tagged ``@pytest.mark.criterion(number, "title")`` are grouped; a
criterion passes when every test carrying its number passed.  One line per
criterion is printed at the end of the session.
"""

import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "ok": True, "ran": False})
    if report.failed:
        entry["ok"] = False
    if report.when == "call":
        entry["ran"] = True
    elif report.when == "setup" and report.skipped:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        verdict = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} [{verdict}] {entry['title']}")
