import pytest

_VERDICTS = []


class _Recorder:
    def __init__(self, name):
        self.name = name

    def __call__(self, ok, detail):
        line = f"{self.name}: {'PASS' if ok else 'FAIL'} | {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    return _Recorder(request.node.name.removeprefix("test_"))


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
