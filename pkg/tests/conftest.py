import sys
from pathlib import Path

import pytest

from sgda.mcsa import MotorParams

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def motor_a():
    return MotorParams(
        supply_frequency_hz=50.0,
        slip=0.073,
        pole_pairs=2,
        sampling_rate_hz=4098.0,
        rotor_frequency_hz=23.17,
        name="Motor A",
    )


_criteria: dict[int, tuple[str, bool]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    if report.when == "setup" and report.passed:
        return
    ok = report.passed and _criteria.get(number, (title, True))[1]
    _criteria[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}")
