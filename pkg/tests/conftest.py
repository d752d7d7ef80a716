import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Record one PASS/FAIL/SKIP line per acceptance criterion."""

    def emit(criterion, ok, detail):
        status = "PASS" if ok is True else "FAIL" if ok is False else ok
        line = f"[acceptance {criterion:>3}] {status:<5} {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
