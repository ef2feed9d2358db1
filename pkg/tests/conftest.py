import math

import numpy as np
import pytest

from pks_sharp.potentials import PotentialParams
from pks_sharp.shapes import Disk
from pks_sharp.stepper import SimConfig

AREA_ONE_RADIUS = 1.0 / math.sqrt(math.pi)


@pytest.fixture(scope="session")
def params():
    return PotentialParams(0.25)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def small_disk_config(**overrides):
    """Cheap disk scenario for unit tests (not the acceptance resolution)."""
    kw = dict(
        epsilon=0.04,
        A=0.25,
        t_end=0.01,
        nx=128,
        ny=128,
        lx=2.0,
        ly=2.0,
        init=Disk(1.0, 1.0, AREA_ONE_RADIUS),
        output_every=25,
    )
    kw.update(overrides)
    return SimConfig(**kw)
