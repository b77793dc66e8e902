import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical or end-to-end test")
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion number n")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    ok = report.passed
    _ACCEPTANCE[crit] = _ACCEPTANCE.get(crit, True) and ok


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is not None:
        rep._criterion = int(mark.args[0])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        tr.write_line(f"criterion {crit}: {'PASS' if _ACCEPTANCE[crit] else 'FAIL'}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
