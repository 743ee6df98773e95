import sys

import numpy as np
import pytest

from enantio_tfc.dynamics import evolve
from enantio_tfc.model import bundled_config


@pytest.fixture(scope="session")
def literal():
    return bundled_config("propanediol")


@pytest.fixture(scope="session")
def balanced():
    return bundled_config("propanediol_balanced")


@pytest.fixture(scope="session")
def balanced_runs(balanced):
    """Full-ramp R and S trajectories of the equal-coupling set, 377 periods."""
    cfg = balanced.replace(tstar_periods=377)
    return cfg, {e: evolve(cfg, e) for e in ("R", "S")}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in mod.REPORT:
            terminalreporter.write_line(line)
