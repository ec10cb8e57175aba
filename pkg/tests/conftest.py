import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ruelle.ifs import build_example_schottky, build_gauss_ifs

settings.register_profile("ruelle", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ruelle")

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

# roots of lambda_0(L_s) = 1 from the circle-collocation transfer matrix (M = 40), frozen
DIM_ORACLE = {"gauss2": 0.5312805062772078, "gauss3": 0.7056609080287392, "schottky": 0.4049726017512621}


@pytest.fixture(scope="session")
def gauss1():
    return build_gauss_ifs(1)


@pytest.fixture(scope="session")
def gauss2():
    return build_gauss_ifs(2)


@pytest.fixture(scope="session")
def gauss3():
    return build_gauss_ifs(3)


@pytest.fixture(scope="session")
def schottky():
    return build_example_schottky()


@pytest.fixture(scope="session", params=["gauss2", "gauss3", "schottky"])
def system(request):
    return request.getfixturevalue(request.param)
