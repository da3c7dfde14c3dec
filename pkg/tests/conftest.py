import numpy as np
import pytest

from tpsdirect.penalty import build_design, build_penalty
from tpsdirect.sampler import build_cache


def random_problem(n, seed, noise=0.3):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(size=(n, 2))
    y = np.sin(2 * np.pi * xy[:, 0]) * np.cos(2 * np.pi * xy[:, 1]) + noise * rng.standard_normal(n)
    penalty = build_penalty(build_design(xy))
    return xy, y, penalty


@pytest.fixture
def problem10():
    return random_problem(10, 10)


@pytest.fixture(scope="session")
def problem50():
    xy, y, penalty = random_problem(50, 50)
    return xy, y, penalty, build_cache(penalty, y)


# filled by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
