import numpy as np
import pytest

from modsel import ModelSpec, UncertaintySet, UtilitySpec


@pytest.fixture
def identity():
    return UtilitySpec.identity()


@pytest.fixture(scope="session")
def objective_model():
    return ModelSpec.of((40, 50), (0.015, 0.02), 40)


@pytest.fixture(scope="session")
def risk_model():
    return ModelSpec.of((30, 20), (0.1, 0.2), 15)


def random_instance(rng: np.random.Generator, max_m=3, max_n=3, max_t=3):
    m = int(rng.integers(1, max_m + 1))
    N = tuple(int(v) for v in rng.integers(0, max_n + 1, size=m))
    theta = tuple(float(v) for v in rng.uniform(0.05, 0.95, size=m))
    T = int(rng.integers(1, max_t + 1))
    return ModelSpec.of(N, theta, T)


def random_profile(rng, m):
    return rng.dirichlet(np.ones(m))


def random_set(rng, m, kind):
    if kind == "singleton":
        return UncertaintySet.singleton(random_profile(rng, m))
    return UncertaintySet.finite([random_profile(rng, m) for _ in range(2)])
