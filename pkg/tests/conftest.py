import pytest

_LINES = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record the verdict line of an acceptance criterion."""
    store = request.config.stash.setdefault(_LINES, {})

    def record(n: int, ok: bool, detail: str) -> None:
        store[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(store[n])

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
