"""Collects acceptance outcomes and prints one line per criterion at the end."""

import pytest

_OUTCOMES: dict[int, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test that decides acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            status = "FAIL (strict xfail)"
        elif report.passed:
            status = "PASS"
        elif report.skipped:
            status = "SKIP"
        else:
            status = "FAIL"
        _OUTCOMES.setdefault(marker.args[0], []).append((item.name, status))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        parts = _OUTCOMES[n]
        overall = "PASS" if all(s == "PASS" for _, s in parts) else "FAIL"
        detail = ", ".join(f"{name}={s}" for name, s in parts)
        terminalreporter.write_line(f"criterion {n}: {overall}  [{detail}]")
