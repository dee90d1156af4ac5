import numpy as np
import pytest

from momobs import (
    FrictionSpec,
    SpiderCraneParams,
    make_constant_inertia,
    make_planar_manipulator,
    make_spider_crane,
    make_spider_crane_cholesky,
)

CRANE_INPUTS_AMPLITUDES = ((1.535, 1.0, 0.0, "cos"), (7.67, 1.0, 0.0, "sin"))


@pytest.fixture(scope="session")
def crane():
    return make_spider_crane()


@pytest.fixture(scope="session")
def crane_known():
    params = SpiderCraneParams(friction=(0.0, 0.0, 0.5), known_mask=(True, True, True))
    return make_spider_crane(params)


@pytest.fixture(scope="session")
def crane_cholesky():
    return make_spider_crane_cholesky()


@pytest.fixture(scope="session")
def manipulator():
    return make_planar_manipulator()


@pytest.fixture(scope="session")
def const2():
    friction = FrictionSpec(np.array([0.4, 0.7]), np.array([False, False]))
    return make_constant_inertia(np.diag([2.0, 0.5]), np.diag([1.0, 2.0]), friction)


@pytest.fixture(scope="session")
def const_identity():
    friction = FrictionSpec(np.array([0.3, 0.2]), np.array([False, False]))
    return make_constant_inertia(np.eye(2), np.zeros((2, 2)), friction)
