import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""
    def record(key, title, failures):
        _ACCEPTANCE[key] = (title, list(failures))
        status = "PASS" if not failures else "FAIL"
        print(f"criterion {key}: {status} - {title}")
        for f in failures:
            print(f"    {f}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        title, failures = _ACCEPTANCE[key]
        status = "PASS" if not failures else "FAIL"
        terminalreporter.write_line(f"criterion {key}: {status} - {title}")
        for f in failures:
            terminalreporter.write_line(f"    {f}")
