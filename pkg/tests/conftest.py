import numpy as np
import pytest

from semff.ingest import write_image


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def frame_dir(tmp_path):
    """Ten 64x48 random frames named 000000.png .. 000009.png."""
    r = np.random.default_rng(7)
    d = tmp_path / "frames"
    d.mkdir()
    for k in range(10):
        write_image(d / f"{k:06d}.png", r.integers(0, 256, size=(48, 64, 3), dtype=np.uint8))
    return d


def textured(height=48, width=64, seed=0):
    """Smooth-ish random grayscale texture as an RGB uint8 frame."""
    from scipy.ndimage import gaussian_filter
    r = np.random.default_rng(seed)
    g = gaussian_filter(r.uniform(0, 255, size=(height, width)), 1.0)
    g = (g - g.min()) / (g.max() - g.min()) * 255
    return np.repeat(g.astype(np.uint8)[..., None], 3, axis=-1)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
