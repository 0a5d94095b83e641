import re

_OUTCOMES = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_", report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    if report.failed:
        _OUTCOMES[key] = "FAIL"
    elif report.when == "call" and key not in _OUTCOMES:
        _OUTCOMES[key] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for number, status in sorted(_OUTCOMES.items()):
        terminalreporter.write_line(f"criterion {number} ({CRITERIA[number]}): {status}")
