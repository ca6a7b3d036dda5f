import numpy as np
import pytest

from garchxtest.model import ParamSpace, ThetaPoint, TrueConfig, simulate_dgp


@pytest.fixture(scope="session")
def space():
    return ParamSpace()


@pytest.fixture(scope="session")
def null_dgp():
    """beta1 = beta2 = 0 with an AR(1) covariate; the weak-regime baseline."""
    return TrueConfig(ThetaPoint(0.0, 0.0, 1.0, 0.2), varphi=0.5, kappa=0.0)


@pytest.fixture(scope="session")
def garch_dgp():
    """A strongly identified configuration away from the boundary."""
    return TrueConfig(ThetaPoint(0.3, 0.0, 1.0, 0.2), varphi=0.5, kappa=0.0)


@pytest.fixture(scope="session")
def small_data(null_dgp):
    return simulate_dgp(null_dgp, 300, seed=101)


@pytest.fixture(scope="session")
def garch_data(garch_dgp):
    return simulate_dgp(garch_dgp, 500, seed=202)


def random_psd(rng: np.random.Generator, d: int, ridge: float = 0.3) -> np.ndarray:
    a = rng.standard_normal((d, d))
    return a @ a.T + ridge * np.eye(d)
