import numpy as np
import pytest

from hdportfolio import ModelParams, PortfolioWeights


def random_spd(p: int, rng: np.random.Generator, jitter: float = 0.5) -> np.ndarray:
    g = rng.standard_normal((p, p))
    m = g @ g.T / p + jitter * np.eye(p)
    return 0.5 * (m + m.T)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


@pytest.fixture
def small_model(rng) -> ModelParams:
    p = 8
    return ModelParams(mu=rng.normal(0.0, 0.2, p), sigma=random_spd(p, rng), gamma=5.0)


@pytest.fixture
def equal_target(small_model) -> PortfolioWeights:
    return PortfolioWeights.equally_weighted(small_model.p)
