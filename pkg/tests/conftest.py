"""Shared model factories and the acceptance summary hook."""
import pytest

from kpplab import BranchingLaw, BranchingModel, Kernel, Motion

#: pass/fail lines appended by the acceptance tests, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def jump_gaussian_binary():
    """Pure-jump gaussian motion with binary branching at the parent."""
    return BranchingModel(
        Motion.pure_jump(Kernel.gaussian(1.0)), BranchingLaw.binary_at_parent()
    )


@pytest.fixture
def jump_exponential_binary():
    return BranchingModel(
        Motion.pure_jump(Kernel.two_sided_exponential(2.0)),
        BranchingLaw.binary_at_parent(),
    )


@pytest.fixture
def brownian_binary():
    """Brownian motion with two children at the parent point."""
    return BranchingModel(
        Motion.brownian(), BranchingLaw.offspring_at_parent({2: 1.0})
    )


@pytest.fixture
def immobile_binary():
    return BranchingModel(Motion.constant(), BranchingLaw.binary_at_parent())


@pytest.fixture
def immobile_offspring():
    """Immobile model with death: p0 = 0.2, p2 = 0.8."""
    return BranchingModel(
        Motion.constant(), BranchingLaw.offspring_at_parent({0: 0.2, 2: 0.8})
    )
