import pytest

_RESULTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = []


@pytest.fixture
def record_criterion(request):
    """Record one acceptance line: ``record_criterion(label, passed, detail)``."""
    def record(label, passed, detail=""):
        request.config.stash[_RESULTS].append((label, bool(passed), detail))
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(_RESULTS, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(rows, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{label}: {status}  {detail}")
