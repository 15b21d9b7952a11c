import numpy as np
import pytest

from pointspec.models import make_model
from pointspec.secular import Scheme, prepare_point_spectrum


@pytest.fixture(scope="session")
def interval_model():
    return make_model("interval-Dirichlet-1D", [np.pi])


@pytest.fixture(scope="session")
def rect_model():
    return make_model("rectangle-Dirichlet-2D", [1.0, np.sqrt(2.0)])


@pytest.fixture(scope="session")
def torus_model():
    return make_model("torus-2D", [2 * np.pi, 2 * np.pi])


@pytest.fixture(scope="session")
def box_model():
    return make_model("box-Dirichlet-3D", [1.0, np.sqrt(2.0), np.sqrt(3.0)])


@pytest.fixture(scope="session")
def scheme():
    return Scheme(alpha_R=1.0, mu_sq=1.0)


@pytest.fixture(scope="session")
def interval_ps(interval_model):
    return prepare_point_spectrum(interval_model, [1.0], 800.0)


@pytest.fixture(scope="session")
def interval_nodal_ps(interval_model):
    return prepare_point_spectrum(interval_model, [np.pi / 2], 800.0)


@pytest.fixture(scope="session")
def rect_ps(rect_model):
    return prepare_point_spectrum(rect_model, [0.37, 0.59], 700.0)


@pytest.fixture(scope="session")
def torus_ps(torus_model):
    return prepare_point_spectrum(torus_model, [1.0, 0.5], 120.0)


@pytest.fixture(scope="session")
def interval_solved(interval_ps, scheme):
    from pointspec.solver import solve_spectrum

    return solve_spectrum(interval_ps, scheme, 8, tol=1e-10)


@pytest.fixture(scope="session")
def rect_solved(rect_ps, scheme):
    from pointspec.solver import solve_spectrum

    return solve_spectrum(rect_ps, scheme, 8, tol=1e-10)
