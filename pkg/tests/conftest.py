import functools

import hypothesis
import numpy as np
import pytest

from genenet.population import PopulationParams, grow

hypothesis.settings.register_profile("ci", max_examples=60, deadline=None)
hypothesis.settings.load_profile("ci")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record():
    """Log one acceptance line, then return the verdict for the caller to assert."""
    def _record(number, ok, detail, elapsed=None, cap=None):
        if cap is not None and elapsed is not None:
            ok = ok and elapsed < cap
            detail = f"{detail}; {elapsed:.1f}s (cap {cap}s)"
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _record


@functools.lru_cache(maxsize=None)
def evolved_pool(parent_count=10, seed=7, max_size=100, births=10_000):
    return grow(PopulationParams(max_size=max_size, parent_count=parent_count, seed=seed, history_every=0), births)


@pytest.fixture(scope="session")
def pool_cache():
    """Evolved pools shared across test files, keyed by (parent_count, seed)."""
    return evolved_pool


@pytest.fixture(scope="session")
def ten_parent_pool():
    return evolved_pool()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
