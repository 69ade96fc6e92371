import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_details: dict[str, str] = {}
_lines: list[str] = []


@pytest.fixture
def acceptance(request):
    """Record a one-line summary for an acceptance criterion; the outcome is added after the test."""

    def note(text: str):
        _details[request.node.nodeid] = text

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    verdict = "PASS" if report.passed else "FAIL"
    line = f"criterion {marker.args[0]}: {verdict}  {marker.args[1]}"
    detail = _details.get(item.nodeid)
    if detail:
        line += f"  [{detail}]"
    _lines.append(line)
    print(f"\n{line}")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if _lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
