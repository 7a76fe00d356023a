import numpy as np
import pytest

_CRITERIA = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def detail(request):
    """Free-form measurements shown next to an acceptance criterion's verdict."""
    d = {}
    request.node.acceptance_detail = d
    return d


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and rep.when == "call":
        _CRITERIA.append((marker.args[0], item.name, rep.passed, getattr(item, "acceptance_detail", {})))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, info in sorted(_CRITERIA, key=lambda r: (r[0], r[1])):
        facts = ", ".join(f"{k}={v}" for k, v in info.items())
        terminalreporter.write_line(f"criterion {number} {'PASS' if passed else 'FAIL'} {name} {facts}".rstrip())
