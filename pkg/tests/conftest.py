import re
import sys

CRITERIA = {
    1: "parameter recovery",
    2: "gradient correctness",
    3: "likelihood-oracle equivalence",
    4: "raw-score sufficiency",
    5: "filtering arithmetic",
    6: "routing-phase difficulty signature",
    7: "end-to-end proxy recovery",
    8: "determinism",
    9: "invariant suites",
}

_ran: set[int] = set()


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_", report.nodeid)
    if m and report.when == "call" or (m and report.failed):
        _ran.add(int(m.group(1)))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not _ran:
        return
    results = module.RESULTS
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n} ({title}): {detail}")
        elif n in _ran:
            terminalreporter.write_line(f"FAIL  criterion {n} ({title}): raised before its check")
        else:
            terminalreporter.write_line(f"NOT RUN  criterion {n} ({title})")
