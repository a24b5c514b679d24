import math

import numpy as np
import pytest

from wmdm import mmspace as M


def two_disk_union_area(r: float, d: float) -> float:
    """Area of the union of two disks of radius ``r`` with centres ``d`` apart."""
    if d >= 2 * r:
        return 2 * math.pi * r * r
    lens = 2 * r * r * math.acos(d / (2 * r)) - 0.5 * d * math.sqrt(4 * r * r - d * d)
    return 2 * math.pi * r * r - lens


LENS_C = math.sqrt(two_disk_union_area(1.0, 1.0))


@pytest.fixture(scope="session")
def sq16():
    return M.square(16)


@pytest.fixture(scope="session")
def sq32():
    return M.square(32)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


def interior_ids(space, margin):
    P = space.coords
    lo, hi = P.min(axis=0), P.max(axis=0)
    ok = np.all((P > lo + margin) & (P < hi - margin), axis=1)
    return np.flatnonzero(ok)
