import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = []


def textured_canvas(size, seed=0, sigma=1.5):
    rng = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(rng.random((size, size)), sigma)
    img = (img - img.min()) / (img.max() - img.min())
    return (img * 255).astype(np.uint8)


def translated_sequence(n_frames, size=256, step=2, seed=0):
    """Crops of one texture sliding ``step`` pixels right per frame."""
    margin = step * n_frames + 8
    canvas = textured_canvas(size + 2 * margin, seed)
    return [canvas[margin:margin + size, margin - k * step:margin - k * step + size].copy()
            for k in range(n_frames)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    skipped = call.excinfo is not None and call.excinfo.errisinstance(pytest.skip.Exception)
    if call.when != "call" and not skipped:
        return
    passed = call.excinfo is None
    _ACCEPTANCE.append((marker.args[0], marker.args[1],
                        "SKIP" if skipped else ("PASS" if passed else "FAIL"),
                        call.stop - call.start))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, outcome, dur in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num}: {outcome:4s} {title} ({dur:.2f} s)")
