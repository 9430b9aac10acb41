import numpy as np
import pytest

from simcrit import _kernels_py
from simcrit._backend import compiled_available

_BACKENDS = ["python"] + (["cython"] if compiled_available() else [])
_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion identifier")


@pytest.fixture(params=_BACKENDS)
def kernels(request):
    if request.param == "python":
        return _kernels_py
    from simcrit import _kernels

    return _kernels


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _criteria.append((number, title, report.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_criteria):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
