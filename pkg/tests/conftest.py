import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dislocore import BoundaryDatum, Domain, GreenEngine  # noqa: E402


@pytest.fixture(scope="session")
def disk():
    return Domain.unit_disk()


@pytest.fixture(scope="session")
def ellipse():
    return Domain.ellipse(2.0, 1.0)


@pytest.fixture(scope="session")
def image(disk):
    return GreenEngine(disk, "image")


@pytest.fixture(scope="session")
def bie_disk(disk):
    return GreenEngine(disk, "bie", 256)


@pytest.fixture(scope="session")
def bie_ellipse(ellipse):
    return GreenEngine(ellipse, "bie", 256)


@pytest.fixture(scope="session")
def uniform(disk):
    return BoundaryDatum.uniform(disk)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_disk_points(rng, m, rmax):
    r = rmax * np.sqrt(rng.random(m))
    th = 2 * np.pi * rng.random(m)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])
