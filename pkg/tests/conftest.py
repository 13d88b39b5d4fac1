"""Collects acceptance-criterion outcomes and prints one line per criterion."""

_RESULTS: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    _RESULTS[number] = (outcome, title, call.duration)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        outcome, title, seconds = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {outcome}  {title} ({seconds:.1f}s)")
