from __future__ import annotations

from collections import defaultdict

from hypothesis import HealthCheck, settings

settings.register_profile("pmots", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pmots")

_outcomes: dict[int, list[bool]] = defaultdict(list)
_titles: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this test checks")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _titles[mark.args[0]] = mark.args[1]


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        _outcomes[mark.args[0]].append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_titles):
        results = _outcomes.get(number)
        if not results:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {_titles[number]}")
