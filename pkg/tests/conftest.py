"""Shared pytest plumbing: the acceptance summary section.

Acceptance tests register one line per criterion; the hook prints them
after the test run so the pass/fail verdicts are visible regardless of
output capturing.
"""

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"criterion {number:02d} {name}: {verdict} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
