import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def fd_laplacian(f, pts, step):
    """Five-point Laplacian of a vectorised field at each point."""
    ex = np.array([step, 0.0])
    ey = np.array([0.0, step])
    return (f(pts + ex) + f(pts - ex) + f(pts + ey) + f(pts - ey) - 4.0 * f(pts)) / step**2


_verdicts: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or not mark.args:
        return
    number, title = mark.args
    failed = report.failed or (report.when == "setup" and report.skipped)
    if failed:
        _verdicts[number] = ("FAIL", title)
    elif report.when == "call":
        _verdicts.setdefault(number, ("PASS", title))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        verdict, title = _verdicts[number]
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {title}")
