"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

import re

_verdicts = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2).replace("_", " "))
    if report.when == "call" or report.failed or report.skipped:
        if report.failed:
            _verdicts[key] = "FAIL"
        elif report.skipped:
            _verdicts.setdefault(key, "SKIP")
        else:
            _verdicts.setdefault(key, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for (n, name), verdict in sorted(_verdicts.items()):
        terminalreporter.write_line(f"criterion {n:2d} ({name}): {verdict}")
