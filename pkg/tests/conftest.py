import pytest

ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def report_criterion():
    """Record one verdict line per acceptance criterion; printed in the terminal summary."""
    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
