import pytest

from casu.layout import default_layout
from casu.protocol import provision

_ACCEPTANCE_LINES: list[str] = []


def record_criterion(line: str) -> None:
    print(line)
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def layout():
    return default_layout()


@pytest.fixture
def sim():
    return provision(seed=3)


@pytest.fixture
def machine(sim):
    return sim.device.machine
