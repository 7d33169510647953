import pytest

from src._shared.rng import RngSeed
from src.fraccalc.models import TimeGrid
from src.sde.models import ConstantSigma, LinearDrift, ModelSpec


@pytest.fixture(scope="session")
def grid_1024() -> TimeGrid:
    return TimeGrid.uniform(1.0, 1024)


@pytest.fixture(scope="session")
def grid_256() -> TimeGrid:
    return TimeGrid.uniform(1.0, 256)


@pytest.fixture(scope="session")
def grid_64() -> TimeGrid:
    return TimeGrid.uniform(1.0, 64)


@pytest.fixture
def seed() -> RngSeed:
    return RngSeed(master=20240607)


@pytest.fixture(scope="session")
def ou_model() -> ModelSpec:
    """Scalar ``dX = -X dt + dB^H`` with ``H = 0.7`` on ``[0, 1]``."""
    return ModelSpec(
        H=0.7,
        d=1,
        T=1.0,
        drift=LinearDrift(A=[[-1.0]]),
        sigma=ConstantSigma(scale=[1.0]),
    )


@pytest.fixture(scope="session")
def free_model() -> ModelSpec:
    """``dX = dB^H``; ``K = L = 0``."""
    return ModelSpec(
        H=0.7,
        d=1,
        T=1.0,
        drift=LinearDrift(A=[[0.0]]),
        sigma=ConstantSigma(scale=[1.0]),
    )
