import numpy as np
import pytest
from scipy import ndimage

from agtrack.flow import GrayFrame


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_texture(seed=0, size=400, sigma=20.):
    """Smooth random texture scaled to [0, 1]"""
    noise = np.random.default_rng(seed).standard_normal((size, size))
    tex = ndimage.gaussian_filter(noise, sigma)
    return (tex - tex.min()) / (tex.max() - tex.min())


def shifted_pair(big, dx, dy, origin=72, side=256):
    """Two crops of big where the content of the second moved by (dx, dy)"""
    prev = big[origin:origin + side, origin:origin + side]
    curr = big[origin - dy:origin - dy + side, origin - dx:origin - dx + side]
    return GrayFrame(prev), GrayFrame(curr)


def numeric_grad(f, x, h=1e-6):
    """Central-difference gradient of scalar f at array x (x is restored)"""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=['multi_index'])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        up = f()
        x[idx] = old - h
        down = f()
        x[idx] = old
        g[idx] = (up - down) / (2. * h)
    return g


@pytest.fixture
def texture():
    return smooth_texture
