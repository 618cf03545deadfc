"""Shared test plumbing: the acceptance-criteria scoreboard.

Acceptance tests wrap their body in `criterion(...)`; the terminal summary
then prints one PASS/FAIL line per criterion with the measured values, so
the whole gate can be read off the bottom of a pytest run.
"""
import time
from contextlib import contextmanager

CRITERIA = {}


@contextmanager
def criterion(num: int, desc: str):
    rec = {"desc": desc, "ok": False, "detail": "did not complete",
           "seconds": 0.0}
    CRITERIA[num] = rec
    t0 = time.perf_counter()
    try:
        yield rec
        rec["ok"] = True
    finally:
        rec["seconds"] = time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        rec = CRITERIA[num]
        word = "PASS" if rec["ok"] else "FAIL"
        terminalreporter.write_line(
            f"criterion {num:2d} [{word}] {rec['desc']}: {rec['detail']} "
            f"({rec['seconds']:.1f}s)")
