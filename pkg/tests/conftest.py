"""Shared pytest hooks: the acceptance-criteria summary lines."""

_criteria = {}


def record_criterion(number, passed, detail):
    """Register a one-line pass/fail verdict for an acceptance criterion."""
    _criteria[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        passed, detail = _criteria[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict} - {detail}")
