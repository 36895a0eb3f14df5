import logging
import warnings

import pytest

from catgate.params import derive, paper_operating_point

logging.getLogger("catgate.cats").setLevel(logging.ERROR)

# criterion lines collected by test_acceptance and echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def paper_params():
    return paper_operating_point()


@pytest.fixture(scope="session")
def paper_derived(paper_params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return derive(paper_params)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
