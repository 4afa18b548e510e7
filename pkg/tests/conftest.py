"""Collects outcomes of tests marked ``criterion`` and prints one line each."""
import pytest

_results: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    name = mark.args[0]
    if rep.failed:
        _results[name] = "FAIL"
    elif rep.when == "call" and rep.passed:
        _results.setdefault(name, "PASS")
    elif rep.skipped:
        _results.setdefault(name, "SKIP")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _results.items():
        terminalreporter.write_line(f"{status}  {name}")
