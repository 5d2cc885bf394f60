import itertools

import numpy as np
import pytest

from premetric.core import validate_premetric

THREE_POINT = [[0.0, 1.0, 3.0], [1.0, 0.0, 1.0], [3.0, 1.0, 0.0]]

PHIS = {
    "square": lambda t: t ** 2,
    "cube": lambda t: t ** 3,
    "saturating": lambda t: 2 * t / (1 + t),
}


def euclidean(n, rng, dim=2):
    p = rng.random((n, dim))
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
    return d / d.max()


def phi_instance(n, rng, phi):
    return validate_premetric(PHIS[phi](euclidean(n, rng)))


def discrete(n):
    return validate_premetric(1.0 - np.eye(n))


def pinched_line(n=10, gap=1e-3):
    """Points on a line, except the two ends are glued to distance ``gap``."""
    x = np.linspace(0.0, 1.0, n)
    h = np.abs(x[:, None] - x[None, :])
    h[0, -1] = h[-1, 0] = gap
    return validate_premetric(h)


def oracle_td(values, a, b):
    """Pure-Python triple scan, independent of the library's own oracle."""
    v = np.asarray(values).tolist()
    n = len(v)
    best = 0.0
    for x, y, z in itertools.product(range(n), repeat=3):
        if v[x][y] <= a and v[y][z] <= b and v[x][z] > best:
            best = v[x][z]
    return best


def oracle_omega(values, delta):
    v = np.asarray(values).tolist()
    n = len(v)
    best = 0.0
    for x, y, z in itertools.product(range(n), repeat=3):
        if v[x][y] <= delta:
            best = max(best, abs(v[x][z] - v[z][y]))
    return best


def worst_triangle(values):
    """Largest ``M[i,k] - M[i,j] - M[j,k]`` over all triples (0 for a metric)."""
    m = np.asarray(values, dtype=float)
    # slack[i, j, k] = m[i, k] - m[i, j] - m[j, k]
    slack = m[:, None, :] - m[:, :, None] - m[None, :, :]
    return max(0.0, float(slack.max()))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def three_point():
    return validate_premetric(THREE_POINT)
