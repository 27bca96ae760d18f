import os
import sys
import time

sys.path.insert(0, os.path.dirname(__file__))

SUITE_BUDGET_S = 120.0
_start = time.monotonic()


def _elapsed() -> float:
    return time.monotonic() - _start


def pytest_terminal_summary(terminalreporter):
    import _verdicts

    if _verdicts.LINES:
        terminalreporter.section("acceptance verdicts")
        for line in _verdicts.LINES:
            terminalreporter.write_line(line)
    took = _elapsed()
    ok = took < SUITE_BUDGET_S
    terminalreporter.write_line(
        f"{'PASS' if ok else 'FAIL'} determinism: full suite wall time {took:.1f}s (budget {SUITE_BUDGET_S:.0f}s)")


def pytest_sessionfinish(session, exitstatus):
    # a green run that blows the time budget still fails the gate
    if exitstatus == 0 and _elapsed() >= SUITE_BUDGET_S:
        session.exitstatus = 1
