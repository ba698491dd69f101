import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from llmroute import core  # noqa: E402

# Fixture workload used throughout: the same draw `llmroute gen --count 500
# --seed 42 --dist lognormal:4,1,2048` writes.
FIXTURE_DIST = core.LogNormal(4.0, 1.0, 2048)
FIXTURE_SEED = 42


@pytest.fixture(scope="session")
def case_fleet():
    return core.load_bundled_profiles("case_study")


@pytest.fixture(scope="session")
def table1_fleet():
    return core.load_bundled_profiles("open_models")


@pytest.fixture(scope="session")
def w500():
    return core.generate_workload(500, FIXTURE_DIST, FIXTURE_SEED)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
