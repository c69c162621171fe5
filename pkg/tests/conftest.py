import pytest

from lowduty.config import EnergyProfile, MacScenario

# acceptance criteria report here; printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def validation_scenario():
    """N=10, BO=SO=5, 87 B payload + 13 B header at 250 kb/s."""
    return MacScenario(arrival_rate=10.0, energy=EnergyProfile.identity())


@pytest.fixture
def cc2420():
    return EnergyProfile.cc2420()
