"""Shared pytest hooks.

The acceptance tests register one verdict line per headline criterion;
printing them from a terminal-summary hook keeps them visible in the
normal captured-output run.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
