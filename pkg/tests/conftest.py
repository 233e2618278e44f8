import numpy as np
import pytest

from rkan.autodiff import Tensor


def central_difference(f, x, h=1e-5):
    """Gradient of scalar ``f(ndarray)`` at ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        g.reshape(-1)[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b, floor=1e-12):
    a, b = np.ravel(a), np.ravel(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def leaf(data):
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)
