import re

_CRITERION = re.compile(r"test_criterion_(\d+)")
_outcomes = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or not (report.when == "call" or report.outcome != "passed"):
        return
    n = int(m.group(1))
    if hasattr(report, "wasxfail"):
        status = ("FAIL", f"(expected failure) {report.wasxfail.removeprefix('reason: ')}")
    elif report.skipped:
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        status = ("SKIP", reason.removeprefix("Skipped: "))
    elif report.failed:
        status = ("FAIL", report.nodeid)
    else:
        status = ("PASS", report.nodeid)
    # a criterion split over several tests takes its worst outcome
    rank = {"PASS": 0, "SKIP": 1, "FAIL": 2}
    if n not in _outcomes or rank[status[0]] > rank[_outcomes[n][0]]:
        _outcomes[n] = status


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status, detail = _outcomes[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
