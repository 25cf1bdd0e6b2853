import pytest

_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(label, passed, detail)``."""
    def record(label: str, passed: bool, detail: str) -> None:
        _RESULTS.append((label, passed, detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for label, passed, detail in sorted(_RESULTS, key=lambda r: int(r[0][2:])):
        terminalreporter.write_line(f"{label} {'PASS' if passed else 'FAIL'}  {detail}")
