import os

import numpy as np
import pytest
from hypothesis import settings

from robomarl.arena import Arena, Rect, default_arena

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running; enabled with RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow suite; set RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def open_arena(obstacles=()):
    """Field with the default births and zones but custom obstacles."""
    base = default_arena()
    return Arena(base.length, base.width, tuple(obstacles), base.birth_areas, base.zones)


@pytest.fixture(scope="session")
def arena():
    return default_arena()


@pytest.fixture(scope="session")
def empty_arena():
    return open_arena()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
