from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

import gaugekit
from gaugekit.geomodel import SigmaModel, load_model

FIXTURES = Path(gaugekit.__file__).parent / "fixtures"

# filled by the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def load(name: str) -> SigmaModel:
    return load_model(FIXTURES / name)


@pytest.fixture(scope="session")
def worked() -> SigmaModel:
    return load("paper_r3.json")


@pytest.fixture(scope="session")
def worked_spec(worked):
    return worked.default_spec()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
