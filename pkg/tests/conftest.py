import pytest

_RESULTS = []


class _Criterion:
    def __init__(self, name):
        self.name = name
        self.details = []

    def note(self, text):
        self.details.append(text)


@pytest.fixture
def criterion(request):
    """Records one acceptance criterion; its outcome is printed at the end of the session."""
    marker = request.node.get_closest_marker("criterion")
    c = _Criterion(marker.args[0] if marker else request.node.name)
    yield c
    _RESULTS.append((request.node.nodeid, c))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call":
        item.stash[_PASSED] = report.passed


_PASSED = pytest.StashKey[bool]()
_ITEMS = {}


def pytest_collection_modifyitems(items):
    for item in items:
        _ITEMS[item.nodeid] = item


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, c in _RESULTS:
        passed = _ITEMS[nodeid].stash.get(_PASSED, False)
        line = f"{'PASS' if passed else 'FAIL'}  {c.name}"
        if c.details:
            line += "  (" + "; ".join(c.details) + ")"
        terminalreporter.write_line(line)
