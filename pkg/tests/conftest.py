import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def record():
    """Log one PASS/FAIL line for an acceptance criterion.

    Lines are printed immediately (visible with ``-s``) and repeated in the
    terminal summary so they always appear in the test log.
    """

    def _record(criterion: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
