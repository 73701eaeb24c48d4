import numpy as np
import pytest

from bifrac import Cube, DyadicGrid, GridFunction, GridSpec, all_intervals


@pytest.fixture(scope="session")
def spec32():
    return GridSpec(1, 1.0, 32)


@pytest.fixture(scope="session")
def spec64():
    return GridSpec(1, 4.0, 64)


@pytest.fixture(scope="session")
def spec2d():
    return GridSpec(2, 1.0, 8)


@pytest.fixture(scope="session")
def intervals32(spec32):
    return all_intervals(spec32)


@pytest.fixture(scope="session")
def grid1d():
    return DyadicGrid((0.0,))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_positive(spec, rng, low=0.2, high=1.5):
    return GridFunction(
        spec, rng.uniform(low, high, spec.shape), nonnegative=True
    )


@pytest.fixture(scope="session")
def unit_cube():
    return Cube((0.0,), 1.0)
