# Shared fixtures: fig1 kernel and parameters, reduced-model parameters, cached spot profile
import os
import sys
from pathlib import Path

import pytest

# Add the backend directory to the Python path
backend_dir = Path(__file__).parent.parent
sys.path.append(str(backend_dir))

# keep test runs off the working-directory database
os.environ.setdefault("DATABASE_URL", "sqlite://")

from app.models.kernel import KernelParams
from app.models.profile import PdeParams
from app.models.rings import ReducedParams


@pytest.fixture(scope="session")
def kernel():
    return KernelParams.builtin("fig1")


@pytest.fixture(scope="session")
def pde_params():
    return PdeParams.fig1()


@pytest.fixture(scope="session")
def below():
    """Reduced parameters of the stationary table (tau = 0.1)"""
    return ReducedParams.from_tau(0.1)


@pytest.fixture(scope="session")
def above():
    """Reduced parameters just above the drift bifurcation"""
    return ReducedParams.from_tau(1.0 / 0.3 + 0.01)


@pytest.fixture(scope="session")
def profile(pde_params):
    from app.services.profile_service import ProfileService

    return ProfileService().profile(pde_params)
