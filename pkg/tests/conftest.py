import numpy as np
import pytest

from fastslow.integrate import SeedSpec
from fastslow.systems import heat_torus_system, lorenz_system, trig_torus_system


@pytest.fixture
def seed():
    return SeedSpec(20240817)


@pytest.fixture
def heat():
    return heat_torus_system(delta=1.0)


@pytest.fixture
def lorenz():
    return lorenz_system(epsilon=0.2, delta=0.0)


@pytest.fixture
def linear():
    # b = 0, g = 0: the slow equation is x' = -x exactly
    return trig_torus_system(epsilon=0.5, delta=0.0, name="linear", aX=-1.0)
