import numpy as np
import pytest

from ccbench.imaging import LinearImage


def rotate(v, axis, degrees):
    """Rodrigues rotation of ``v`` about ``axis`` (independent of the package)."""
    v = np.asarray(v, dtype=float)
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    t = np.radians(degrees)
    return v * np.cos(t) + np.cross(k, v) * np.sin(t) + k * np.dot(k, v) * (1 - np.cos(t))


def perpendicular(v):
    """Some unit vector orthogonal to ``v``."""
    v = np.asarray(v, dtype=float)
    trial = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 * np.linalg.norm(v) else np.array([0.0, 1.0, 0.0])
    p = np.cross(v, trial)
    return p / np.linalg.norm(p)


def make_image(data, black=0.0, sat=65535.0, subtracted=True, camera_id="test"):
    return LinearImage(np.asarray(data, dtype=float), black, sat, camera_id, subtracted)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
