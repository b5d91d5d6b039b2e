"""Prints one PASS/FAIL line per acceptance criterion after the run."""
from collections import OrderedDict


def pytest_terminal_summary(terminalreporter):
    outcome = OrderedDict()
    for key in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(key, []):
            props = dict(getattr(report, "user_properties", ()))
            if "criterion" not in props or report.when not in ("call", "setup"):
                continue
            name = props["criterion"]
            ok = outcome.get(name, True) and key == "passed"
            outcome[name] = ok
    if not outcome:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(outcome, key=lambda n: int(n.split()[0])):
        terminalreporter.write_line(f"{'PASS' if outcome[name] else 'FAIL'}  criterion {name}")
