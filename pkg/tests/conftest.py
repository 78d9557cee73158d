import numpy as np
import pytest

from ostbc.codes import BUILTIN_NAMES, builtin

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=BUILTIN_NAMES)
def spec(request):
    return builtin(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_channel(rng, N, M):
    return (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))) / np.sqrt(2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
