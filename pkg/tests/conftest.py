"""Shared pytest hooks: one summary line per acceptance criterion."""

import re

ACCEPTANCE: dict[str, tuple[bool, str]] = {}
CRITERIA = [str(i) for i in range(1, 10)]


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)


def pytest_runtest_logreport(report):
    # a fixture or setup error never reaches record(); count it as a failure
    m = re.search(r"test_acceptance\.py::TestCriterion(\d)", report.nodeid)
    if m and report.failed and m.group(1) not in ACCEPTANCE:
        ACCEPTANCE[m.group(1)] = (False, f"errored during {report.when}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in CRITERIA:
        if c in ACCEPTANCE:
            ok, detail = ACCEPTANCE[c]
            terminalreporter.write_line(f"criterion {c}: {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"criterion {c}: NOT RUN")
