import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> {"name", "budget", "passed", "failed", "seconds"}
_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, name, budget): acceptance criterion n with a runtime budget in seconds")


def pytest_collection_finish(session):
    for item in session.items:
        mark = item.get_closest_marker("criterion")
        if mark is None:
            continue
        n, name = mark.args
        entry = _criteria.setdefault(n, {"name": name, "budget": mark.kwargs.get("budget"),
                                         "passed": 0, "failed": 0, "seconds": 0.0, "nodes": set()})
        entry["nodes"].add(item.nodeid)


def pytest_runtest_logreport(report):
    for entry in _criteria.values():
        if report.nodeid not in entry["nodes"]:
            continue
        entry["seconds"] += report.duration
        if report.failed:
            entry["failed"] += 1
        elif report.when == "call" and report.passed:
            entry["passed"] += 1


def _verdict(entry) -> bool:
    within = entry["budget"] is None or entry["seconds"] <= entry["budget"]
    return entry["failed"] == 0 and entry["passed"] == len(entry["nodes"]) and within


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        budget = f"/{e['budget']}s" if e["budget"] is not None else ""
        terminalreporter.write_line(
            f"criterion {n} {'PASS' if _verdict(e) else 'FAIL'}  {e['name']}  "
            f"({e['passed']}/{len(e['nodes'])} tests, {e['seconds']:.2f}s{budget})"
        )


def pytest_sessionfinish(session, exitstatus):
    # A criterion that blew its runtime budget fails the run even if its tests passed.
    if exitstatus == 0 and any(not _verdict(e) for e in _criteria.values() if e["passed"] == len(e["nodes"])):
        session.exitstatus = 1
