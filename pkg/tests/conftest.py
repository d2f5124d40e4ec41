"""Shared pytest plumbing: deterministic property tests and the
acceptance-criteria report.

Acceptance tests record one line per criterion; the hook reprints them all in
a dedicated terminal section so the full scoreboard is visible in one place
even when individual tests fail.
"""

from hypothesis import settings

# The whole suite is a reproducibility gate, so property tests run with a
# fixed example stream rather than a fresh random seed per invocation.
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")

ACCEPTANCE_REPORT: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_REPORT:
        terminalreporter.write_line(line)
