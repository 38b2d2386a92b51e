import numpy as np
import pytest

from ctxpaste.bank import load_bank, make_cutout
from ctxpaste.camera import CameraExtrinsics, CameraIntrinsics
from ctxpaste.context import discover_bundles, make_context
from ctxpaste.fixtures import write_fixture_set
from ctxpaste.imaging import load_rgb

_ACCEPTANCE = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _ACCEPTANCE.append((marker.args[0], marker.args[1], rep.outcome, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome, duration in sorted(_ACCEPTANCE):
        flag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{flag}] criterion {number}: {title} ({duration:.2f}s)")


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    return write_fixture_set(tmp_path_factory.mktemp("fixtures"))


@pytest.fixture(scope="session")
def bundles(fixture_dir):
    return discover_bundles(fixture_dir / "backgrounds", fixture_dir / "context", fixture_dir / "camera.txt")


@pytest.fixture(scope="session")
def contexts(bundles):
    return [b.load() for b in bundles]


@pytest.fixture(scope="session")
def backgrounds(bundles):
    return [load_rgb(b.background) for b in bundles]


@pytest.fixture(scope="session")
def bank(fixture_dir):
    return load_bank(fixture_dir / "masks", fixture_dir / "masks" / "manifest.txt")


@pytest.fixture
def camera():
    return CameraIntrinsics(1000.0, 1000.0, 640.0, 360.0), CameraExtrinsics(1.5)


def solid_cutout(h, w, rgb=(1.0, 0.5, 0.0), category="traffic_cone", h_range=(0.45, 0.9), source_id="solid"):
    px = np.zeros((h, w, 4))
    px[..., :3] = rgb
    px[..., 3] = 1.0
    return make_cutout(px, category, h_range, source_id)


def open_context(width=1280, height=720, cy=360.0, **kwargs):
    """All-freespace context below the horizon."""
    free = np.zeros((height, width), dtype=bool)
    free[int(cy) + 1:] = True
    intr = CameraIntrinsics(1000.0, 1000.0, width / 2, cy)
    return make_context(free, intrinsics=intr, extrinsics=CameraExtrinsics(1.5), **kwargs)
