"""One summary line per acceptance criterion at the end of the run."""

from collections import defaultdict

import pytest

_RESULTS = defaultdict(list)   # criterion -> [(test name, outcome, detail)]
N_CRITERIA = 11


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _RESULTS[mark.args[0]].append((item.name, rep.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        runs = _RESULTS.get(n)
        if not runs:
            tr.write_line(f"criterion {n:2d}: NOT RUN")
            continue
        ok = all(o == "passed" for _, o, _ in runs)
        details = " | ".join(f"{name}: {o}{' (' + d + ')' if d else ''}" for name, o, d in runs)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {details}")
