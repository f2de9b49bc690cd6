import os
import sys

import pytest

TESTS_DIR = os.path.dirname(os.path.abspath(__file__))

_CRITERION_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(num, title): tags a test as one acceptance criterion"
    )


def fake_engine_cmd(*extra: str) -> str:
    script = os.path.join(TESTS_DIR, "agents", "fake_uci.py")
    return " ".join([sys.executable, script, *extra])


def stub_agent_cmd(*extra: str) -> str:
    script = os.path.join(TESTS_DIR, "agents", "stub_agent.py")
    return " ".join([sys.executable, script, *extra])


@pytest.fixture
def engine_cmd() -> str:
    return fake_engine_cmd()


@pytest.fixture
def agent_cmd() -> str:
    return stub_agent_cmd()


_STATUS_RANK = {"FAIL": 3, "PASS": 2, "SKIPPED (prerequisite absent)": 1}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, title = marker.args
    if report.when == "setup" and report.skipped:
        status = "SKIPPED (prerequisite absent)"
    elif report.when == "call":
        status = "PASS" if report.passed else "FAIL"
    else:
        return
    current = _CRITERION_RESULTS.get((num, title))
    if current is None or _STATUS_RANK[status] > _STATUS_RANK[current]:
        _CRITERION_RESULTS[(num, title)] = status


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for (num, title), status in sorted(_CRITERION_RESULTS.items(), key=lambda kv: kv[0][0]):
        terminalreporter.write_line(f"criterion {num} ({title}): {status}")
