import pytest

_CRITERIA = {}


@pytest.fixture(scope="session")
def criteria():
    """Record ``criteria[key] = (passed, detail)`` for the acceptance summary."""
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    keys = [k for k in _CRITERIA if not str(k).startswith("_")]
    for key in sorted(keys, key=lambda k: (int(str(k).split()[0]), str(k))):
        passed, detail = _CRITERIA[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
