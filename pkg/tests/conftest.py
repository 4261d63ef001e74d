import numpy as np
import pytest

from qspec import (
    CoefficientCurve,
    FrequencyGrid,
    TriangularArrayModel,
    default_curve,
)


@pytest.fixture(scope="session")
def grid():
    return FrequencyGrid.fourier(512)


@pytest.fixture(scope="session")
def tv_model_1024():
    return TriangularArrayModel(curve=default_curve(), T=1024)


@pytest.fixture(scope="session")
def const_model(request):
    return TriangularArrayModel(curve=CoefficientCurve.constant(0.5), T=1024)


@pytest.fixture(scope="session")
def iid_model():
    return TriangularArrayModel(curve=CoefficientCurve.constant(0.0), T=1024)


def omega_index(grid, value):
    idx = np.flatnonzero(np.isclose(grid.omegas, value))
    assert len(idx) == 1
    return int(idx[0])
