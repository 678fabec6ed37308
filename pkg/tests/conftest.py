import functools

import pytest
from hypothesis import settings

from poisson_capacity import ChannelParams, SolverConfig, choose_truncation, solve

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def cached_solve(amplitude: float, dark_current: float = 0.0):
    return solve(ChannelParams(amplitude, dark_current), SolverConfig())


@pytest.fixture
def solved():
    """``solved(A, lam) -> (params, trunc, solution)`` with solutions shared across tests."""

    def get(amplitude, dark_current=0.0):
        params = ChannelParams(amplitude, dark_current)
        return params, choose_truncation(params), cached_solve(float(amplitude), float(dark_current))

    return get


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "criterion"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: (int(s.split()[1].rstrip(".abcdefg:")), s)):
            terminalreporter.write_line(line)
