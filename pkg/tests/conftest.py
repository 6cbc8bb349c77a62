from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ucpqubo import instances
from ucpqubo.builder import build_qubo, tune_penalties
from ucpqubo.stochastic import build_qubo_relaxed, tune_all_relaxed

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def xxs():
    return instances.xxs()


@pytest.fixture(scope="session")
def xs():
    return instances.xs()


@pytest.fixture(scope="session")
def xs_relaxed():
    return instances.xs_relaxed()


@pytest.fixture(scope="session")
def xxs_qubo(xxs):
    return build_qubo(xxs)


@pytest.fixture(scope="session")
def xs_qubo(xs):
    return build_qubo(xs)


@pytest.fixture(scope="session")
def xs_relaxed_qubo(xs_relaxed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return build_qubo_relaxed(xs_relaxed)


@pytest.fixture(scope="session")
def xs_weights(xs):
    return tune_penalties(xs)


@pytest.fixture(scope="session")
def xs_relaxed_weights(xs_relaxed):
    return tune_all_relaxed(xs_relaxed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
