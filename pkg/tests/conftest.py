from pathlib import Path

import hypothesis
import numpy as np
import pytest

from mvlandmark.geometry import CameraView, intrinsics_matrix, look_at_rotation

hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile("ci")

FIXTURES = Path(__file__).parent / "fixtures"


def random_rotation(rng) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_view(rng, view_id=0, target=(0.0, 0.0, 0.0)) -> CameraView:
    """Camera 2-6 units from ``target`` looking at it, with random roll."""
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    eye = np.asarray(target) + rng.uniform(2.0, 6.0) * direction
    up = rng.standard_normal(3)
    R = look_at_rotation(eye, target, up)
    K = intrinsics_matrix(rng.uniform(300, 1500), rng.uniform(300, 1500),
                          rng.uniform(150, 350), rng.uniform(150, 350), rng.uniform(-2, 2))
    return CameraView(K, R, -R @ eye, (512, 512), view_id)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# -- acceptance reporting ----------------------------------------------------
# tests marked ``criterion(number, title)`` get one PASS/FAIL line each,
# printed in the terminal summary and on stdout as they finish

_verdicts = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config.stash[_verdicts] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when == "teardown" or (report.when == "setup" and report.passed):
        return
    number, title = marker.args
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    status = "PASS" if report.passed else "FAIL"
    line = f"[{status}] criterion {number}: {title}" + (f" | {detail}" if detail else "")
    item.config.stash[_verdicts].append((number, line))
    reporter = item.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None and item.config.getoption("verbose") > 0:
        reporter.write_line("")
        reporter.write_line(line)


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(_verdicts, [])
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(verdicts):
            terminalreporter.write_line(line)
