import pytest

# Filled by test_acceptance.py: one line per acceptance criterion.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def record_criterion():
    def record(n, ok, text):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}"
        ACCEPTANCE_LINES[n] = line
        print(line)
        return ok

    return record
