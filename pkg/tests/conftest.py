import numpy as np
import pytest

from dipolemedium.geometry import CloudRealization

_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_realization(positions, seed=0):
    return CloudRealization(np.asarray(positions, dtype=float), seed)


@pytest.fixture
def report(request):
    """Attach a one-line measurement summary to an acceptance criterion."""

    def add(text):
        request.node.user_properties.append(("detail", text))

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = marker.args
    details = [v for k, v in rep.user_properties if k == "detail"]
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    # one criterion may be checked by several tests; any failure fails it
    _CRITERIA.setdefault(number, (title, []))[1].append((status, details))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, parts = _CRITERIA[number]
        statuses = {st for st, _ in parts}
        status = "FAIL" if "FAIL" in statuses else ("SKIP" if "SKIP" in statuses else "PASS")
        detail = "; ".join(d for _, ds in parts for d in ds)
        line = f"criterion {number} [{status}] {title}"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)
