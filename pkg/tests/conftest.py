import numpy as np
import pytest

from sphtransport.geometry import icosahedral_nodes


@pytest.fixture(scope="session")
def nodes642():
    return icosahedral_nodes(3)


@pytest.fixture(scope="session")
def nodes2562():
    return icosahedral_nodes(4)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


def random_sphere_points(rng, count):
    pts = rng.normal(size=(count, 3))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)
