import pytest

_RESULTS: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; returns the pass flag for the assert."""

    def record(name: str, passed: bool, detail: str) -> bool:
        line = f"{name} {'PASS' if passed else 'FAIL'}: {detail}"
        _RESULTS.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
