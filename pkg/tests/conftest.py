"""Shared fixtures: cached scenario runs and the acceptance summary printout."""

from __future__ import annotations

import functools

import pytest
from hypothesis import settings

from goeflow.scenarios import build_scenario
from goeflow.simulate import simulate

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def cached_run(scenario: str, n: int, M: float, scheme: str, viscosity: bool):
    """Simulate one preset once per test session (runs are deterministic)."""
    cfg = build_scenario(scenario, n, M, scheme, viscosity)
    return simulate(cfg)


@pytest.fixture(scope="session")
def run_case():
    return cached_run


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
