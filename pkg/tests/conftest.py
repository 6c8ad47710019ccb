import os

import pytest

# criterion outcomes collected by test_acceptance, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def record(name: str, passed: bool | None, detail: str = ""):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"{status}  {name}  {detail}".rstrip())

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def pytest_configure(config):
    os.environ.setdefault("PYTHONHASHSEED", "0")
