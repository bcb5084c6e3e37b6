import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from approxctrl import TimeGrid, build_table, heat_memory_model  # noqa: E402


@pytest.fixture(scope="session")
def example_model():
    return heat_memory_model(8)


@pytest.fixture(scope="session")
def example_table(example_model):
    return build_table(example_model, TimeGrid(example_model.horizon, 1000))


ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store one acceptance outcome; printed in the terminal summary."""
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion:2d}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k:2d}: {detail}")
