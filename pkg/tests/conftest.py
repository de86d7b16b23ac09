import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    entry = _CRITERIA.setdefault(num, {"title": title, "ok": True, "details": [], "ran": False})
    if rep.when == "call":
        entry["ran"] = True
        entry["details"] += [v for k, v in item.user_properties if k == "detail"]
    if rep.failed:
        entry["ok"] = False
        if rep.when != "call":
            entry["details"].append(f"{rep.when} error")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        detail = "; ".join(e["details"])
        tr.write_line(f"[{status}] criterion {num:>2}: {e['title']}" + (f" | {detail}" if detail else ""))
