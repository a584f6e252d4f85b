import numpy as np
import pytest


def make_test_image():
    """Deterministic 64x64 gray-scale crop: gradient, blob, two flat patches."""
    yy, xx = np.mgrid[0:64, 0:64]
    img = 60 + 120 * (xx / 63)
    img += 60 * np.exp(-(((xx - 20) ** 2 + (yy - 28) ** 2) / 120))
    img[40:56, 8:24] = 210
    img[10:20, 40:60] = 40
    return np.clip(np.rint(img), 0, 255).astype(float)


@pytest.fixture(scope="session")
def test_image():
    return make_test_image()
