import numpy as np
import pytest

from pawcap.body.skeleton import SkeletonProportions, load_human_topology


@pytest.fixture(scope='module')
def human():
    return load_human_topology()


@pytest.fixture
def rest_proportions(human):
    return SkeletonProportions.from_topology(human)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
