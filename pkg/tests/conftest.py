import datetime as dt

import numpy as np
import pytest

from denguerisk.forcing import RATE_NAMES, ClimateSeries, RateSet, default_rates

START = dt.date(2022, 1, 1)


@pytest.fixture(scope="session")
def rates():
    return default_rates()


def constant_rates(**overrides) -> RateSet:
    """Temperature-independent rates; unspecified ones are 0.1 (ov 10, gamma_v 0.2)."""
    values = {n: 0.1 for n in RATE_NAMES}
    values.update(ov=10.0, gamma_v=0.2)
    values.update(overrides)
    return RateSet.constant(values)


def sinusoid(days=200, lo=15.0, hi=30.0, period=120.0, precip=0.0) -> ClimateSeries:
    t = np.arange(days)
    mid, amp = (lo + hi) / 2, (hi - lo) / 2
    return ClimateSeries(START, mid + amp * np.sin(2 * np.pi * t / period), np.full(days, precip))


# one PASS/FAIL line per acceptance criterion in the terminal summary
_ACCEPTANCE: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    rep = outcome.get_result()
    number, title = mark.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "passed": True, "seconds": 0.0,
                                            "detail": ""})
    if rep.when == "call":
        entry["seconds"] += rep.duration
        entry["detail"] = "; ".join(v for k, v in item.user_properties if k == "detail")
    if rep.failed:
        entry["passed"] = False
        if rep.when == "call" and call.excinfo is not None:
            msg = str(call.excinfo.value).strip().splitlines()
            entry["error"] = msg[0] if msg else call.excinfo.typename


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        status = "PASS" if e["passed"] else "FAIL"
        line = f"[{status}] {number:2d}. {e['title']} ({e['seconds']:.1f} s)"
        if e["detail"]:
            line += f": {e['detail']}"
        if not e["passed"] and e.get("error"):
            line += f" | {e['error']}"
        terminalreporter.write_line(line)
