import numpy as np
import pytest

from models.limit_model import build_limit_model
from models.offspring import OffspringDistribution
from models.steps import StepDistribution


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def geometric_model():
    return build_limit_model(OffspringDistribution.geometric(0.5), StepDistribution(alpha=1., p=1., q=0.))


@pytest.fixture(scope='session')
def binary_model():
    return build_limit_model(OffspringDistribution.regular(2), StepDistribution(alpha=1., p=1., q=0.))


@pytest.fixture(scope='session')
def two_sided_model():
    return build_limit_model(OffspringDistribution.geometric(0.5), StepDistribution(alpha=1., p=0.5, q=0.5))
