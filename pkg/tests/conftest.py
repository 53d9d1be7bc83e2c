import os

import pytest

from mertenslab.primes import build_cache, load_cache, save_cache

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def small_cache():
    return build_cache(10**6)


@pytest.fixture(scope="session")
def cache_1e7():
    return build_cache(10**7)


@pytest.fixture(scope="session")
def big_cache(tmp_path_factory):
    """The 1e8 cache; reused from $MERTENSLAB_CACHE_DIR when present."""
    d = os.environ.get("MERTENSLAB_CACHE_DIR")
    if d:
        path = os.path.join(d, f"primes_{10**8}.nplc")
        if os.path.exists(path):
            return load_cache(path)
    cache = build_cache(10**8)
    if d:
        os.makedirs(d, exist_ok=True)
        save_cache(cache, path)
    return cache


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
