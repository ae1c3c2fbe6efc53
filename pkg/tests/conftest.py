from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"

_acceptance: dict[str, tuple[str, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def corpus() -> Path:
    return CORPUS


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = report.nodeid.split("::")[-1]
        outcome = "XFAIL" if hasattr(report, "wasxfail") else report.outcome.upper()
        _acceptance[label] = (outcome, report.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, (outcome, _) in sorted(_acceptance.items()):
        verdict = "PASS" if outcome == "PASSED" else "FAIL" if outcome == "FAILED" else outcome
        terminalreporter.write_line(f"{verdict:5s} {label}")
