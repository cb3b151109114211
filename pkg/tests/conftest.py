import pytest

from misscausal import numcore as nc


@pytest.fixture
def rng():
    return nc.RngStream(1234, "tests")


# one summary line per acceptance criterion, printed whatever the capture mode
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
