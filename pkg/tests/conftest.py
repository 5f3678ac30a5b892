import pytest

from optliq.model import ModelParams
from optliq.value import ValueContext


@pytest.fixture(scope="session")
def params():
    return ModelParams.reference()


@pytest.fixture(scope="session")
def ctx(params):
    return ValueContext.from_params(params)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
