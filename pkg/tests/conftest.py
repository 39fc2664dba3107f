import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from lstm_formal.experiments import ExperimentConfig, train


@pytest.fixture(scope="session")
def briefly_trained_anbn():
    """An aⁿbⁿ model after 40 epochs: accepts a contiguous block of n, then fails."""
    return train(ExperimentConfig(epochs=40, trials=1), 0).params


_criteria: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or (call.when != "call" and call.excinfo is None):
        return
    number, title = marker.args
    detail = next((v for k, v in item.user_properties if k == "detail"), "")
    status = "PASS" if call.excinfo is None else "FAIL"
    _criteria[f"{number:>2}"] = (status, f"{title}{': ' + detail if detail else ''}")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria, key=int):
        status, text = _criteria[number]
        terminalreporter.write_line(f"criterion {number} {status}  {text}")
