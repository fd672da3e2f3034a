import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance_report():
    """Record ``(number, passed, detail)`` for the end-of-run summary."""
    return _ACCEPTANCE.append


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
