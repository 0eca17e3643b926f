from __future__ import annotations

import pytest

from ogp_lab.rng import make_rng

_CRITERIA: dict = {}


@pytest.fixture
def rng():
    return make_rng((0, 2024), 0)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = report.user_properties and dict(report.user_properties).get("criterion")
    if crit:
        _CRITERIA[crit] = "PASS" if report.passed else "FAIL"


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark and not any(k == "criterion" for k, _ in item.user_properties):
        num, title = mark.args
        item.user_properties.append(("criterion", (num, title)))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), verdict in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"criterion {num:>2} {verdict}: {title}")
