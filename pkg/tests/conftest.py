import pytest

from sofrgit.core.asian_engine import AsianContract, GridSpec
from sofrgit.core.config import RunConfig
from sofrgit.core.term_structure import ModelSpec, ParamCurve


@pytest.fixture
def reference_model() -> ModelSpec:
    """
    Built-in defaults: beta = -1, flat alpha = -0.1, sigma = 20 (20% of the
    spot factor), rbar_star = -1%, horizon 0.25.
    """
    return RunConfig().model_spec()


@pytest.fixture
def small_grid() -> GridSpec:
    # coarse enough for unit tests, fine enough for the level recurrences
    return GridSpec(n_t=8, n_x=24, n_z=6, x_max=1000.0)


@pytest.fixture
def atm_put() -> AsianContract:
    return AsianContract(K=100.0, T=0.25, t0=0.0, y_spot=100.0)


@pytest.fixture
def flat_model():
    """Factory for a flat-curve model on [0, horizon]."""

    def make(*, beta: float = -1.0, alpha: float = 0.0, sigma: float = 0.3, rbar_star: float = -0.01,
             horizon: float = 1.0, **kw) -> ModelSpec:
        return ModelSpec(
            beta=beta,
            alpha=ParamCurve.flat(alpha, 0.0, horizon),
            sigma=ParamCurve.flat(sigma, 0.0, horizon),
            rbar_star=ParamCurve.flat(rbar_star, 0.0, horizon),
            horizon=horizon,
            **kw,
        )

    return make
