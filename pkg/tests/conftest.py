import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full-scale reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="full-scale run; pass --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def random_spd(rng, p, cond_floor=0.1):
    A = rng.standard_normal((p, p))
    return A @ A.T / p + cond_floor * np.eye(p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


# acceptance outcomes, one line per criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
